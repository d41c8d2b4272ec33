use std::rc::Rc;

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::gemm::gemm;
use crate::tape::Tensor;

/// A directed message edge `source -> target` whose mixing matrix is
/// `filters[filter]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeRef {
    pub target: usize,
    pub source: usize,
    pub filter: usize,
}

/// Edge-conditioned neighbourhood aggregation.
///
/// `h` is `N x Din`, `filters` is `U x Dout x Din`. Node `i` receives the
/// mean of `filters[e.filter] * h[e.source]` over its incoming edges; nodes
/// without incoming edges receive zeros.
pub fn ecc_aggregate(h: &Tensor, filters: &Tensor, edges: &Rc<Vec<EdgeRef>>) -> Result<Tensor> {
    let (hv, fv) = (h.value(), filters.value());
    let (hs, fs) = (hv.shape(), fv.shape());
    if hs.len() != 2 || fs.len() != 3 || fs[2] != hs[1] {
        return Err(NnError::Shape(format!(
            "ecc_aggregate: h {hs:?}, filters {fs:?}"
        )));
    }
    let (n, din) = (hs[0], hs[1]);
    let (u, dout) = (fs[0], fs[1]);
    let mut degree = vec![0usize; n];
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); u];
    for (k, e) in edges.iter().enumerate() {
        for node in [e.target, e.source] {
            if node >= n {
                return Err(NnError::DanglingEdge { node, nodes: n });
            }
        }
        if e.filter >= u {
            return Err(NnError::Shape(format!(
                "edge uses filter {} of {u}",
                e.filter
            )));
        }
        degree[e.target] += 1;
        groups[e.filter].push(k);
    }
    let inv_deg: Rc<Vec<f64>> = Rc::new(
        degree
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 })
            .collect(),
    );
    let fsize = dout * din;
    let mut out = vec![0.0; n * dout];
    for (fi, group) in groups.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let m = group.len();
        let mut gathered = Vec::with_capacity(m * din);
        for &k in group {
            let s = edges[k].source;
            gathered.extend_from_slice(&hv.data()[s * din..(s + 1) * din]);
        }
        let mut y = vec![0.0; m * dout];
        gemm(
            m,
            din,
            dout,
            &gathered,
            false,
            &fv.data()[fi * fsize..][..fsize],
            true,
            0.0,
            &mut y,
        );
        for (row, &k) in y.chunks(dout).zip(group) {
            let t = edges[k].target;
            let scale = inv_deg[t];
            for (o, v) in out[t * dout..(t + 1) * dout].iter_mut().zip(row) {
                *o += scale * v;
            }
        }
    }
    let out = Array::from_vec(&[n, dout], out)?;
    let edges = Rc::clone(edges);
    let fshape = fs.to_vec();
    Ok(h.tape()
        .record("ecc_aggregate", out, &[h, filters], move |g, needs| {
            let gd = g.data();
            let mut dh = needs[0].then(|| vec![0.0; n * din]);
            let mut df = needs[1].then(|| vec![0.0; u * fsize]);
            for (fi, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                let m = group.len();
                let mut dy = Vec::with_capacity(m * dout);
                for &k in group {
                    let t = edges[k].target;
                    let scale = inv_deg[t];
                    dy.extend(gd[t * dout..(t + 1) * dout].iter().map(|v| v * scale));
                }
                let filt = &fv.data()[fi * fsize..][..fsize];
                if let Some(dh) = dh.as_mut() {
                    let mut dg = vec![0.0; m * din];
                    gemm(m, dout, din, &dy, false, filt, false, 0.0, &mut dg);
                    for (row, &k) in dg.chunks(din).zip(group) {
                        let s = edges[k].source;
                        for (a, b) in dh[s * din..(s + 1) * din].iter_mut().zip(row) {
                            *a += b;
                        }
                    }
                }
                if let Some(df) = df.as_mut() {
                    let mut gathered = Vec::with_capacity(m * din);
                    for &k in group {
                        let s = edges[k].source;
                        gathered.extend_from_slice(&hv.data()[s * din..(s + 1) * din]);
                    }
                    gemm(
                        dout,
                        m,
                        din,
                        &dy,
                        true,
                        &gathered,
                        false,
                        0.0,
                        &mut df[fi * fsize..][..fsize],
                    );
                }
            }
            vec![
                dh.map(|v| Array::from_vec(&[n, din], v).expect("ecc dh")),
                df.map(|v| Array::from_vec(&fshape, v).expect("ecc df")),
            ]
        }))
}
