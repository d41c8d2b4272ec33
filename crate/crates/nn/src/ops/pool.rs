use crate::array::Array;
use crate::error::{NnError, Result};
use crate::tape::Tensor;

/// 2x2 max pooling with stride 2 over a `C x H x W` input (H, W even).
/// Ties resolve to the first maximum in row-major window order.
pub fn max_pool2(x: &Tensor) -> Result<Tensor> {
    let xv = x.value();
    let s = xv.shape();
    if s.len() != 3 || !s[1].is_multiple_of(2) || !s[2].is_multiple_of(2) {
        return Err(NnError::Shape(format!("max_pool2: {s:?}")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let (ph, pw) = (h / 2, w / 2);
    let d = xv.data();
    let mut out = vec![0.0; c * ph * pw];
    let mut arg = vec![0usize; c * ph * pw];
    for ci in 0..c {
        for i in 0..ph {
            for j in 0..pw {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let idx = ci * h * w + (2 * i + dy) * w + 2 * j + dx;
                    if d[idx] > best {
                        best = d[idx];
                        best_idx = idx;
                    }
                }
                let o = ci * ph * pw + i * pw + j;
                out[o] = best;
                arg[o] = best_idx;
            }
        }
    }
    let out = Array::from_vec(&[c, ph, pw], out)?;
    let in_shape = s.to_vec();
    Ok(x.tape().record("max_pool2", out, &[x], move |g, _| {
        let mut dx = Array::zeros(&in_shape);
        let dd = dx.data_mut();
        for (gv, &idx) in g.data().iter().zip(&arg) {
            dd[idx] += gv;
        }
        vec![Some(dx)]
    }))
}
