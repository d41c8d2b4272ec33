//! Binary-grid helpers shared by several modules: connected components,
//! hole filling, erosion and the Euclidean distance transform.
//!
//! Masks are row-major `n x n` slices of `bool`.

use std::collections::VecDeque;

pub const N4: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
pub const N8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[inline]
pub fn offset(r: usize, c: usize, dr: isize, dc: isize, n: usize) -> Option<(usize, usize)> {
    let r2 = r as isize + dr;
    let c2 = c as isize + dc;
    if r2 < 0 || c2 < 0 || r2 >= n as isize || c2 >= n as isize {
        None
    } else {
        Some((r2 as usize, c2 as usize))
    }
}

/// 4-connected components of the `true` cells. Returns per-cell component
/// index (`None` for `false` cells) and component sizes, in scan order of
/// each component's first cell.
pub fn components4(mask: &[bool], n: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut label = vec![None; n * n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n * n {
        if !mask[start] || label[start].is_some() {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        label[start] = Some(id);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (r, c) = (i / n, i % n);
            for (dr, dc) in N4 {
                if let Some((r2, c2)) = offset(r, c, dr, dc, n) {
                    let j = r2 * n + c2;
                    if mask[j] && label[j].is_none() {
                        label[j] = Some(id);
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

pub fn count_components4(mask: &[bool], n: usize) -> usize {
    components4(mask, n).1.len()
}

/// Keeps only the largest 4-connected component (first in scan order on ties).
pub fn largest_component(mask: &[bool], n: usize) -> Vec<bool> {
    let (label, sizes) = components4(mask, n);
    let Some(best) = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))) else {
        return vec![false; n * n];
    };
    label.iter().map(|l| *l == Some(best)).collect()
}

/// `false` cells that cannot reach the grid border through 4-connected
/// `false` cells.
pub fn holes(mask: &[bool], n: usize) -> Vec<bool> {
    let mut outside = vec![false; n * n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        for (r, c) in [(0, i), (n - 1, i), (i, 0), (i, n - 1)] {
            let j = r * n + c;
            if !mask[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / n, i % n);
        for (dr, dc) in N4 {
            if let Some((r2, c2)) = offset(r, c, dr, dc, n) {
                let j = r2 * n + c2;
                if !mask[j] && !outside[j] {
                    outside[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (0..n * n).map(|i| !mask[i] && !outside[i]).collect()
}

pub fn fill_holes(mask: &[bool], n: usize) -> Vec<bool> {
    let h = holes(mask, n);
    mask.iter().zip(&h).map(|(&m, &h)| m || h).collect()
}

/// Erosion by a `(2r+1) x (2r+1)` square; cells beyond the grid count as
/// background.
pub fn erode8(mask: &[bool], n: usize, radius: usize) -> Vec<bool> {
    let rad = radius as isize;
    (0..n * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            mask[i]
                && (-rad..=rad).all(|dr| {
                    (-rad..=rad)
                        .all(|dc| offset(r, c, dr, dc, n).is_some_and(|(r2, c2)| mask[r2 * n + c2]))
                })
        })
        .collect()
}

/// Dilation by a `(2r+1) x (2r+1)` square.
pub fn dilate8(mask: &[bool], n: usize, radius: usize) -> Vec<bool> {
    let rad = radius as isize;
    (0..n * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            (-rad..=rad).any(|dr| {
                (-rad..=rad)
                    .any(|dc| offset(r, c, dr, dc, n).is_some_and(|(r2, c2)| mask[r2 * n + c2]))
            })
        })
        .collect()
}

/// Stand-in for "no occupied cell"; finite so the envelope arithmetic stays exact.
const FAR: f64 = 1e12;

/// Squared 1D distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let para = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..f.len() {
        let mut s = para(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = para(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = f[v[k]] + d * d;
    }
}

/// Euclidean distance (in cells) from every cell center to the nearest
/// `occupied` cell center. With `border_occupied`, the ring of cells just
/// outside the grid counts as occupied.
pub fn distance_transform(occupied: &[bool], n: usize, border_occupied: bool) -> Vec<f64> {
    let pad = usize::from(border_occupied);
    let m = n + 2 * pad;
    let mut grid = vec![FAR; m * m];
    for r in 0..m {
        for c in 0..m {
            let inside = r >= pad && c >= pad && r < n + pad && c < n + pad;
            let occ = if inside {
                occupied[(r - pad) * n + (c - pad)]
            } else {
                true
            };
            if occ {
                grid[r * m + c] = 0.0;
            }
        }
    }
    let mut f = vec![0.0; m];
    let mut out = vec![0.0; m];
    let mut v = vec![0usize; m];
    let mut z = vec![0.0; m + 1];
    for c in 0..m {
        for r in 0..m {
            f[r] = grid[r * m + c];
        }
        edt_1d(&f, &mut out, &mut v, &mut z);
        for r in 0..m {
            grid[r * m + c] = out[r];
        }
    }
    for r in 0..m {
        f.copy_from_slice(&grid[r * m..(r + 1) * m]);
        edt_1d(&f, &mut out, &mut v, &mut z);
        grid[r * m..(r + 1) * m].copy_from_slice(&out);
    }
    let mut res = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let d2 = grid[(r + pad) * m + c + pad];
            res.push(if d2 >= FAR { f64::INFINITY } else { d2.sqrt() });
        }
    }
    res
}
