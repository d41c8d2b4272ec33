//! Non-learned reference predictors.

use rand::Rng;

use crate::boundgraph::BoundaryLoop;
use crate::dfpg::{trajectory_distance, CellMap, GridSpec, SegmentLabel, Trajectory};
use crate::error::Result;
use crate::regularize::{door_runs_on_loop, normalize_door_width};

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull (monotone chain), counter-clockwise in a y-up frame,
/// without collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_hull(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            cross(hull[0], hull[1], p).abs() < 1e-9
                && crate::dfpg::point_segment_distance(p, hull[0], hull[1]) < 1e-9
        }
        k => (0..k).all(|i| cross(hull[i], hull[(i + 1) % k], p) >= -1e-9),
    }
}

/// Cells within `radius_cells` of the walk, closed under the convex hull
/// of their centers.
pub fn hull_baseline(traj: &Trajectory, grid: GridSpec, radius_cells: f64) -> Result<CellMap> {
    let n = grid.n;
    let limit = radius_cells * grid.cell_size_m;
    let dist = trajectory_distance(grid, traj, limit + 1e-9)?;
    let centers: Vec<[f64; 2]> = (0..n * n)
        .filter(|&i| dist[i] <= limit + 1e-9)
        .map(|i| [(i % n) as f64, (i / n) as f64])
        .collect();
    let hull = convex_hull(&centers);
    Ok(CellMap::from_fn(n, |r, c| {
        f64::from(u8::from(inside_hull(&hull, [c as f64, r as f64])))
    }))
}

/// Up to `count` random non-touching doors of width `width` on the loop,
/// seeded at uniformly random segments and normalized like predictions.
pub fn random_doors<R: Rng>(
    lp: &BoundaryLoop,
    count: usize,
    width: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let len = lp.len();
    let mut labels = vec![SegmentLabel::Wall; len];
    let mut tries = 0;
    while door_runs_on_loop(&labels).len() < count && tries < 50 * count.max(1) {
        tries += 1;
        let mut next = labels.clone();
        next[rng.random_range(0..len)] = SegmentLabel::Door;
        let next = normalize_door_width(&next, lp, width)?;
        if door_runs_on_loop(&next).len() > door_runs_on_loop(&labels).len() {
            labels = next;
        }
    }
    Ok(super::door_position_runs(&labels))
}
