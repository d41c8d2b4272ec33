use std::rc::Rc;

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::gemm::gemm;
use crate::tape::Tensor;

fn im2col(x: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = k / 2;
    let hw = h * w;
    let mut cols = vec![0.0; c * k * k * hw];
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    for (xo, d) in dst.iter_mut().enumerate() {
                        let sx = xo as isize + kx as isize - pad as isize;
                        if sx >= 0 && sx < w as isize {
                            *d = src[sx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = k / 2;
    let hw = h * w;
    let mut x = vec![0.0; c * hw];
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    for (xo, s) in src.iter().enumerate() {
                        let sx = xo as isize + kx as isize - pad as isize;
                        if sx >= 0 && sx < w as isize {
                            dst[sx as usize] += s;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Same-padded, stride-1 convolution of a `C x H x W` input with an
/// `O x C x k x k` kernel (k odd) and per-channel bias.
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (xv, wv, bv) = (x.value(), weight.value(), bias.value());
    let (xs, ws) = (xv.shape(), wv.shape());
    if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || ws[2] % 2 == 0 {
        return Err(NnError::Shape(format!(
            "conv2d: input {xs:?}, kernel {ws:?}"
        )));
    }
    if bv.shape() != [ws[0]] {
        return Err(NnError::Shape(format!("conv2d: bias {:?}", bv.shape())));
    }
    let (c, h, w) = (xs[0], xs[1], xs[2]);
    let (o, k) = (ws[0], ws[2]);
    let hw = h * w;
    let ckk = c * k * k;
    let cols: Rc<Vec<f64>> = Rc::new(if k == 1 {
        xv.data().to_vec()
    } else {
        im2col(xv.data(), c, h, w, k)
    });
    let mut out = vec![0.0; o * hw];
    for (oi, chunk) in out.chunks_mut(hw).enumerate() {
        chunk.fill(bv.data()[oi]);
    }
    gemm(o, ckk, hw, wv.data(), false, &cols, false, 1.0, &mut out);
    let out = Array::from_vec(&[o, h, w], out)?;
    let wshape = ws.to_vec();
    Ok(x.tape()
        .record("conv2d", out, &[x, weight, bias], move |g, needs| {
            let gd = g.data();
            let dx = needs[0].then(|| {
                let mut dcols = vec![0.0; ckk * hw];
                gemm(ckk, o, hw, wv.data(), true, gd, false, 0.0, &mut dcols);
                let dx = if k == 1 {
                    dcols
                } else {
                    col2im(&dcols, c, h, w, k)
                };
                Array::from_vec(&[c, h, w], dx).expect("conv dx")
            });
            let dw = needs[1].then(|| {
                let mut dw = vec![0.0; o * ckk];
                gemm(o, hw, ckk, gd, false, &cols, true, 0.0, &mut dw);
                Array::from_vec(&wshape, dw).expect("conv dw")
            });
            let db = needs[2].then(|| {
                let db = gd.chunks(hw).map(|ch| ch.iter().sum()).collect();
                Array::from_vec(&[o], db).expect("conv db")
            });
            vec![dx, dw, db]
        }))
}

/// Transposed convolution with a 2x2 kernel and stride 2: `C x H x W` to
/// `O x 2H x 2W`, kernel laid out as `C x O x 2 x 2`.
pub fn conv_transpose2x2(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (xv, wv, bv) = (x.value(), weight.value(), bias.value());
    let (xs, ws) = (xv.shape(), wv.shape());
    if xs.len() != 3 || ws.len() != 4 || ws[0] != xs[0] || ws[2] != 2 || ws[3] != 2 {
        return Err(NnError::Shape(format!(
            "conv_transpose2x2: input {xs:?}, kernel {ws:?}"
        )));
    }
    if bv.shape() != [ws[1]] {
        return Err(NnError::Shape(format!(
            "conv_transpose2x2: bias {:?}",
            bv.shape()
        )));
    }
    let (c, h, w) = (xs[0], xs[1], xs[2]);
    let o = ws[1];
    let hw = h * w;
    let (oh, ow) = (2 * h, 2 * w);
    let mut y = vec![0.0; o * 4 * hw];
    gemm(o * 4, c, hw, wv.data(), true, xv.data(), false, 0.0, &mut y);
    let mut out = vec![0.0; o * oh * ow];
    for oi in 0..o {
        let b = bv.data()[oi];
        for a in 0..2 {
            for bb in 0..2 {
                let src = &y[(oi * 4 + a * 2 + bb) * hw..][..hw];
                for i in 0..h {
                    let dst = &mut out[oi * oh * ow + (2 * i + a) * ow..][..ow];
                    for j in 0..w {
                        dst[2 * j + bb] = src[i * w + j] + b;
                    }
                }
            }
        }
    }
    let out = Array::from_vec(&[o, oh, ow], out)?;
    let wshape = ws.to_vec();
    Ok(x.tape().record(
        "conv_transpose2x2",
        out,
        &[x, weight, bias],
        move |g, needs| {
            let gd = g.data();
            let mut dy = vec![0.0; o * 4 * hw];
            for oi in 0..o {
                for a in 0..2 {
                    for bb in 0..2 {
                        let dst = &mut dy[(oi * 4 + a * 2 + bb) * hw..][..hw];
                        for i in 0..h {
                            let src = &gd[oi * oh * ow + (2 * i + a) * ow..][..ow];
                            for j in 0..w {
                                dst[i * w + j] = src[2 * j + bb];
                            }
                        }
                    }
                }
            }
            let dx = needs[0].then(|| {
                let mut dx = vec![0.0; c * hw];
                gemm(c, o * 4, hw, wv.data(), false, &dy, false, 0.0, &mut dx);
                Array::from_vec(&[c, h, w], dx).expect("tconv dx")
            });
            let dw = needs[1].then(|| {
                let mut dw = vec![0.0; c * o * 4];
                gemm(c, hw, o * 4, xv.data(), false, &dy, true, 0.0, &mut dw);
                Array::from_vec(&wshape, dw).expect("tconv dw")
            });
            let db = needs[2].then(|| {
                let db = gd.chunks(oh * ow).map(|ch| ch.iter().sum()).collect();
                Array::from_vec(&[o], db).expect("tconv db")
            });
            vec![dx, dw, db]
        },
    ))
}
