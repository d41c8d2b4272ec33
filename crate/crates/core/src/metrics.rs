//! Tolerance-based precision, recall and F1 for cell masks and doors.
//!
//! Empty sets are scored vacuously: a metric over zero items is 1. So an
//! empty prediction against an empty target gives (1, 1, 1), an empty
//! target with a non-empty prediction gives (0, 1, 0), and the mirror case
//! gives (1, 0, 0).

use serde::{Deserialize, Serialize};

use crate::dfpg::{CellMap, Dfpg, SegmentId};
use crate::error::{Error, Result};
use crate::pipeline::FloorPlan;
use crate::raster;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrF1 {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    /// Averages precision and recall over samples, then takes F1 of the means.
    pub fn mean(items: &[PrF1]) -> PrF1 {
        if items.is_empty() {
            return PrF1::new(0.0, 0.0);
        }
        let k = items.len() as f64;
        PrF1::new(
            items.iter().map(|p| p.precision).sum::<f64>() / k,
            items.iter().map(|p| p.recall).sum::<f64>() / k,
        )
    }
}

fn ratio(hit: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Cell precision/recall: a cell is matched when a cell of the other mask
/// lies within Chebyshev distance `tol_cells`.
pub fn cell_pr(pred: &CellMap, gt: &CellMap, tol_cells: usize) -> Result<PrF1> {
    let n = pred.n();
    if gt.n() != n {
        return Err(Error::Shape(format!(
            "prediction is {n}x{n}, target is {0}x{0}",
            gt.n()
        )));
    }
    let p = pred.to_mask();
    let g = gt.to_mask();
    let near_p = raster::dilate8(&p, n, tol_cells);
    let near_g = raster::dilate8(&g, n, tol_cells);
    let count = |a: &[bool], b: &[bool]| a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let n_p = p.iter().filter(|&&v| v).count();
    let n_g = g.iter().filter(|&&v| v).count();
    Ok(PrF1::new(
        ratio(count(&p, &near_g), n_p),
        ratio(count(&g, &near_p), n_g),
    ))
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Euclidean distance between segments `a0-a1` and `b0-b1`.
pub fn segment_distance(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    let proper = ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
    let touching = (d1 == 0.0 && on_segment(a0, b0, b1))
        || (d2 == 0.0 && on_segment(a1, b0, b1))
        || (d3 == 0.0 && on_segment(b0, a0, a1))
        || (d4 == 0.0 && on_segment(b1, a0, a1));
    if proper || touching {
        return 0.0;
    }
    use crate::dfpg::point_segment_distance as psd;
    psd(a0, b0, b1)
        .min(psd(a1, b0, b1))
        .min(psd(b0, a0, a1))
        .min(psd(b1, a0, a1))
}

fn metric_endpoints(id: SegmentId, cell_size_m: f64) -> ([f64; 2], [f64; 2]) {
    let (a, b) = id.endpoints();
    let m = |p: [usize; 2]| [p[0] as f64 * cell_size_m, p[1] as f64 * cell_size_m];
    (m(a), m(b))
}

/// Minimum segment-to-segment distance between two doors, in meters.
pub fn door_distance(a: &[SegmentId], b: &[SegmentId], cell_size_m: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &sa in a {
        let (a0, a1) = metric_endpoints(sa, cell_size_m);
        for &sb in b {
            let (b0, b1) = metric_endpoints(sb, cell_size_m);
            best = best.min(segment_distance(a0, a1, b0, b1));
        }
    }
    best
}

/// Greedy one-to-one matching of pairs within `tol`, in ascending distance
/// order (ties by prediction, then target index). Returns matched pairs.
pub fn greedy_match(dist: &[Vec<f64>], tol: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = dist
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &d)| (d, i, j)))
        .filter(|&(d, _, _)| d <= tol)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let cols = dist.first().map_or(0, Vec::len);
    let mut used_p = vec![false; dist.len()];
    let mut used_g = vec![false; cols];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn door_pr(
    pred: &[Vec<SegmentId>],
    gt: &[Vec<SegmentId>],
    tol_m: f64,
    cell_size_m: f64,
) -> PrF1 {
    let dist: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| {
            gt.iter()
                .map(|g| door_distance(p, g, cell_size_m))
                .collect()
        })
        .collect();
    let tp = greedy_match(&dist, tol_m).len();
    PrF1::new(ratio(tp, pred.len()), ratio(tp, gt.len()))
}

fn bbox_center2(mask: &CellMap) -> Result<(i64, i64)> {
    let n = mask.n();
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..n {
        for c in 0..n {
            if mask.get(r, c) > 0.5 {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 == usize::MAX {
        return Err(Error::NoInterior { probability: None });
    }
    Ok(((c0 + c1) as i64, (r0 + r1) as i64))
}

/// Integer `(dx, dy)` cell offset moving the bounding-box center of `pred`
/// onto that of `gt`; half-cell differences round toward zero.
pub fn bbox_offset(pred: &CellMap, gt: &CellMap) -> Result<(i64, i64)> {
    let (px, py) = bbox_center2(pred)?;
    let (gx, gy) = bbox_center2(gt)?;
    // Centers are doubled; integer division truncates toward zero.
    Ok(((gx - px) / 2, (gy - py) / 2))
}

/// Translates `pred` so its interior bounding box is centred on the target's.
pub fn align_by_bbox(pred: &FloorPlan, gt: &Dfpg) -> Result<FloorPlan> {
    let gt_interior = CellMap::from_mask(gt.n(), &gt.interior_mask());
    let (dx, dy) = bbox_offset(&pred.interior, &gt_interior)?;
    pred.translated(dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Per-cell pair scan, independent of the dilation used above.
    fn brute_cell_pr(pred: &CellMap, gt: &CellMap, tol: usize) -> (f64, f64) {
        let n = pred.n();
        let cells = |m: &CellMap| {
            (0..n * n)
                .filter(|&i| m.data()[i] > 0.5)
                .map(|i| ((i / n) as i64, (i % n) as i64))
                .collect::<Vec<_>>()
        };
        let (p, g) = (cells(pred), cells(gt));
        let near = |a: (i64, i64), set: &[(i64, i64)]| {
            set.iter()
                .any(|b| (a.0 - b.0).abs().max((a.1 - b.1).abs()) <= tol as i64)
        };
        let prec = ratio(p.iter().filter(|&&a| near(a, &g)).count(), p.len());
        let rec = ratio(g.iter().filter(|&&a| near(a, &p)).count(), g.len());
        (prec, rec)
    }

    fn block(n: usize, r0: usize, c0: usize, h: usize, w: usize) -> CellMap {
        CellMap::from_fn(n, |r, c| {
            f64::from(u8::from(
                (r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c),
            ))
        })
    }

    #[test]
    fn cell_examples() {
        let g = block(10, 3, 3, 3, 3);
        assert_eq!(cell_pr(&g, &g, 1).unwrap(), PrF1::new(1.0, 1.0));
        assert_eq!(
            cell_pr(&block(10, 3, 4, 3, 3), &g, 1).unwrap(),
            PrF1::new(1.0, 1.0)
        );
        // Shift by 2: columns 4..6 of the target and 5..7 of the prediction match.
        let two = cell_pr(&block(10, 3, 5, 3, 3), &g, 1).unwrap();
        assert_eq!(
            brute_cell_pr(&block(10, 3, 5, 3, 3), &g, 1),
            (2.0 / 3.0, 2.0 / 3.0)
        );
        assert!(
            (two.precision - 2.0 / 3.0).abs() < 1e-15 && (two.recall - 2.0 / 3.0).abs() < 1e-15
        );
        let e = CellMap::zeros(10);
        assert_eq!(cell_pr(&e, &e, 1).unwrap(), PrF1::new(1.0, 1.0));
        assert_eq!(
            cell_pr(&g, &e, 1).unwrap(),
            PrF1 {
                precision: 0.0,
                recall: 1.0,
                f1: 0.0
            }
        );
        assert_eq!(
            cell_pr(&e, &g, 1).unwrap(),
            PrF1 {
                precision: 1.0,
                recall: 0.0,
                f1: 0.0
            }
        );
        assert!(cell_pr(&CellMap::zeros(4), &g, 1).is_err());
    }

    fn h_door(row: usize, col: usize, len: usize) -> Vec<SegmentId> {
        (col..col + len)
            .map(|c| SegmentId::H { row, col: c })
            .collect()
    }

    #[test]
    fn door_examples() {
        let gt = vec![h_door(4, 2, 4), h_door(10, 8, 4)];
        assert_eq!(door_pr(&gt, &gt, 0.25, 0.25), PrF1::new(1.0, 1.0));
        // Parallel, 0.3 m apart with 0.1 m cells.
        assert_eq!(
            door_pr(&[h_door(7, 2, 4)], &[h_door(4, 2, 4)], 0.25, 0.1),
            PrF1::new(0.0, 0.0)
        );
        // Two candidates 0.1 m and 0.2 m from a single target.
        let pred = [h_door(5, 2, 4), h_door(6, 2, 4)];
        let d: Vec<f64> = pred.iter().map(|p| door_distance(p, &gt[0], 0.1)).collect();
        assert!((d[0] - 0.1).abs() < 1e-12 && (d[1] - 0.2).abs() < 1e-12);
        let r = door_pr(&pred, &gt[..1], 0.25, 0.1);
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        // Perpendicular doors sharing a corner are at distance 0.
        let v = vec![SegmentId::V { row: 4, col: 2 }];
        assert_eq!(door_distance(&v, &gt[0], 0.25), 0.0);
    }

    /// Exhaustive maximum matching size over all injections, for tiny sets.
    fn best_matching(dist: &[Vec<f64>], tol: f64, i: usize, used: &mut Vec<bool>) -> usize {
        if i == dist.len() {
            return 0;
        }
        let mut best = best_matching(dist, tol, i + 1, used);
        for j in 0..used.len() {
            if !used[j] && dist[i][j] <= tol {
                used[j] = true;
                best = best.max(1 + best_matching(dist, tol, i + 1, used));
                used[j] = false;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn dilation_matches_pair_scan(
            a in prop::collection::vec(prop::bool::weighted(0.2), 64),
            b in prop::collection::vec(prop::bool::weighted(0.2), 64),
            tol in 0usize..3,
        ) {
            let (pa, pb) = (CellMap::from_mask(8, &a), CellMap::from_mask(8, &b));
            let m = cell_pr(&pa, &pb, tol).unwrap();
            prop_assert_eq!((m.precision, m.recall), brute_cell_pr(&pa, &pb, tol));
        }

        #[test]
        fn greedy_is_one_to_one_and_maximal(
            d in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 0..5), tol in 0.0f64..1.0,
        ) {
            let m = greedy_match(&d, tol);
            let mut seen_p = std::collections::HashSet::new();
            let mut seen_g = std::collections::HashSet::new();
            for &(i, j) in &m {
                prop_assert!(d[i][j] <= tol);
                prop_assert!(seen_p.insert(i) && seen_g.insert(j));
            }
            // Greedy is a maximal matching, so at least half of the optimum.
            let opt = best_matching(&d, tol, 0, &mut vec![false; 4]);
            prop_assert!(2 * m.len() >= opt && m.len() <= opt);
        }

        #[test]
        fn segment_distance_matches_sampling(
            a in prop::array::uniform4(0.0f64..5.0), b in prop::array::uniform4(0.0f64..5.0),
        ) {
            let d = segment_distance([a[0], a[1]], [a[2], a[3]], [b[0], b[1]], [b[2], b[3]]);
            let mut approx = f64::INFINITY;
            for k in 0..=400 {
                let t = k as f64 / 400.0;
                let p = [a[0] + t * (a[2] - a[0]), a[1] + t * (a[3] - a[1])];
                approx = approx.min(crate::dfpg::point_segment_distance(p, [b[0], b[1]], [b[2], b[3]]));
            }
            prop_assert!(d <= approx + 1e-12);
            prop_assert!(approx - d <= 0.02);
        }
    }

    #[test]
    fn bbox_offsets() {
        let g = block(20, 4, 4, 5, 6);
        assert_eq!(bbox_offset(&g, &g).unwrap(), (0, 0));
        assert_eq!(bbox_offset(&block(20, 4, 7, 5, 6), &g).unwrap(), (-3, 0));
        // Centers: x 6.5 vs 7.0 (+0.5 -> 0), y 6.0 vs 4.5 (-1.5 -> -1).
        let odd = block(20, 3, 5, 4, 5);
        let even = block(20, 5, 4, 3, 6);
        assert_eq!(bbox_offset(&even, &odd).unwrap(), (0, -1));
        assert!(bbox_offset(&CellMap::zeros(20), &g).is_err());
    }
}
