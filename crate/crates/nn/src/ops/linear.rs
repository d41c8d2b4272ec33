use crate::array::Array;
use crate::error::{NnError, Result};
use crate::gemm::gemm;
use crate::tape::Tensor;

/// Fully-connected layer: `x (N x D)`, `weight (O x D)`, `bias (O)` to `N x O`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (xv, wv, bv) = (x.value(), weight.value(), bias.value());
    let (xs, ws) = (xv.shape(), wv.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bv.shape() != [ws[0]] {
        return Err(NnError::Shape(format!(
            "linear: x {xs:?}, w {ws:?}, b {:?}",
            bv.shape()
        )));
    }
    let (n, d, o) = (xs[0], xs[1], ws[0]);
    let mut out = Vec::with_capacity(n * o);
    for _ in 0..n {
        out.extend_from_slice(bv.data());
    }
    gemm(n, d, o, xv.data(), false, wv.data(), true, 1.0, &mut out);
    let out = Array::from_vec(&[n, o], out)?;
    Ok(x.tape()
        .record("linear", out, &[x, weight, bias], move |g, needs| {
            let gd = g.data();
            let dx = needs[0].then(|| {
                let mut dx = vec![0.0; n * d];
                gemm(n, o, d, gd, false, wv.data(), false, 0.0, &mut dx);
                Array::from_vec(&[n, d], dx).expect("linear dx")
            });
            let dw = needs[1].then(|| {
                let mut dw = vec![0.0; o * d];
                gemm(o, n, d, gd, true, xv.data(), false, 0.0, &mut dw);
                Array::from_vec(&[o, d], dw).expect("linear dw")
            });
            let db = needs[2].then(|| {
                let mut db = vec![0.0; o];
                for row in gd.chunks(o) {
                    for (a, b) in db.iter_mut().zip(row) {
                        *a += b;
                    }
                }
                Array::from_vec(&[o], db).expect("linear db")
            });
            vec![dx, dw, db]
        }))
}
