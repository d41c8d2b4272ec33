use crate::array::Array;
use crate::error::{NnError, Result};
use crate::tape::Tensor;

/// Per-feature mean and (biased) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;

/// Batch normalization over the rows of an `N x D` input.
///
/// With `running = None` the batch statistics are used (training mode) and
/// returned so the caller can update its running averages. With running
/// statistics supplied they are treated as constants (inference mode).
pub fn batch_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: Option<&BatchNormStats>,
) -> Result<(Tensor, BatchNormStats)> {
    let (xv, gv, bv) = (x.value(), gamma.value(), beta.value());
    let xs = xv.shape();
    if xs.len() != 2 || gv.shape() != [xs[1]] || bv.shape() != [xs[1]] {
        return Err(NnError::Shape(format!(
            "batch_norm: x {xs:?}, gamma {:?}, beta {:?}",
            gv.shape(),
            bv.shape()
        )));
    }
    let (n, d) = (xs[0], xs[1]);
    if n == 0 {
        return Err(NnError::Shape("batch_norm: empty batch".into()));
    }
    let stats = match running {
        Some(s) => {
            if s.mean.len() != d || s.var.len() != d {
                return Err(NnError::Shape("batch_norm: running stats length".into()));
            }
            s.clone()
        }
        None => {
            let mut mean = vec![0.0; d];
            let mut var = vec![0.0; d];
            for row in xv.data().chunks(d) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for row in xv.data().chunks(d) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= n as f64);
            BatchNormStats { mean, var }
        }
    };
    let inv_std: Vec<f64> = stats
        .var
        .iter()
        .map(|v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    let mut xhat = vec![0.0; n * d];
    let mut out = vec![0.0; n * d];
    for (i, row) in xv.data().chunks(d).enumerate() {
        for j in 0..d {
            let h = (row[j] - stats.mean[j]) * inv_std[j];
            xhat[i * d + j] = h;
            out[i * d + j] = gv.data()[j] * h + bv.data()[j];
        }
    }
    let out = Array::from_vec(&[n, d], out)?;
    let batch_mode = running.is_none();
    let tensor = x
        .tape()
        .record("batch_norm", out, &[x, gamma, beta], move |g, needs| {
            let gd = g.data();
            let gam = gv.data();
            let dx = needs[0].then(|| {
                let mut dx = vec![0.0; n * d];
                if batch_mode {
                    let mut sum_dh = vec![0.0; d];
                    let mut sum_dh_h = vec![0.0; d];
                    for i in 0..n {
                        for j in 0..d {
                            let dh = gd[i * d + j] * gam[j];
                            sum_dh[j] += dh;
                            sum_dh_h[j] += dh * xhat[i * d + j];
                        }
                    }
                    let nf = n as f64;
                    for i in 0..n {
                        for j in 0..d {
                            let dh = gd[i * d + j] * gam[j];
                            dx[i * d + j] = inv_std[j] / nf
                                * (nf * dh - sum_dh[j] - xhat[i * d + j] * sum_dh_h[j]);
                        }
                    }
                } else {
                    for i in 0..n {
                        for j in 0..d {
                            dx[i * d + j] = gd[i * d + j] * gam[j] * inv_std[j];
                        }
                    }
                }
                Array::from_vec(&[n, d], dx).expect("bn dx")
            });
            let dgamma = needs[1].then(|| {
                let mut dg = vec![0.0; d];
                for i in 0..n {
                    for j in 0..d {
                        dg[j] += gd[i * d + j] * xhat[i * d + j];
                    }
                }
                Array::from_vec(&[d], dg).expect("bn dgamma")
            });
            let dbeta = needs[2].then(|| {
                let mut db = vec![0.0; d];
                for row in gd.chunks(d) {
                    for (a, b) in db.iter_mut().zip(row) {
                        *a += b;
                    }
                }
                Array::from_vec(&[d], db).expect("bn dbeta")
            });
            vec![dx, dgamma, dbeta]
        });
    Ok((tensor, stats))
}
