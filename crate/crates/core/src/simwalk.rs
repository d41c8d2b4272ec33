//! Randomized walk trajectories through a ground-truth room: stratified
//! waypoints, open TSP ordering, shortest-path stitching, loops around
//! furniture and detours to every door.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dfpg::{CellLabel, CellMap, Dfpg, GridSpec, Trajectory};
use crate::error::{Error, Result};
use crate::raster;

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Side of the stratification blocks.
    pub strat_cell_m: f64,
    /// Sampling and stitching keep this many cells away from walls and furniture.
    pub wall_buffer_cells: usize,
    /// Points per furniture loop.
    pub loop_points: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            strat_cell_m: 2.0,
            wall_buffer_cells: 1,
            loop_points: 4,
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strat_cell_m.is_nan() || self.strat_cell_m <= 0.0 || self.loop_points == 0 {
            return Err(Error::Config(format!("simulator: {self:?}")));
        }
        Ok(())
    }

    pub fn block_cells(&self, grid: GridSpec) -> usize {
        ((self.strat_cell_m / grid.cell_size_m).round() as usize).max(1)
    }
}

/// At most one cell per `block x block` tile, drawn among the `free` cells of
/// the tile with probability proportional to the distance to the nearest
/// `occupied` cell (cells beyond the grid count as occupied).
pub fn stratified_samples<R: Rng>(
    free: &CellMap,
    occupied: &CellMap,
    block: usize,
    rng: &mut R,
) -> Result<Vec<Cell>> {
    let n = free.n();
    if occupied.n() != n {
        return Err(Error::Shape("free and occupied maps differ in size".into()));
    }
    let block = block.max(1);
    let dist = raster::distance_transform(&occupied.to_mask(), n, true);
    let free = free.to_mask();
    let mut out = Vec::new();
    for br in (0..n).step_by(block) {
        for bc in (0..n).step_by(block) {
            let cells: Vec<Cell> = (br..(br + block).min(n))
                .flat_map(|r| (bc..(bc + block).min(n)).map(move |c| (r, c)))
                .filter(|&(r, c)| free[r * n + c])
                .collect();
            if cells.is_empty() {
                continue;
            }
            let weights: Vec<f64> = cells.iter().map(|&(r, c)| dist[r * n + c]).collect();
            let pick = match WeightedIndex::new(&weights) {
                Ok(w) => w.sample(rng),
                // All weights zero (free cells touching occupied ones only).
                Err(_) => rng.random_range(0..cells.len()),
            };
            out.push(cells[pick]);
        }
    }
    if out.is_empty() {
        return Err(Error::NoFreeSpace);
    }
    Ok(out)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Length of the open path visiting `points` in `order`.
pub fn path_length(points: &[[f64; 2]], order: &[usize]) -> f64 {
    order
        .windows(2)
        .map(|w| dist(points[w[0]], points[w[1]]))
        .sum()
}

/// Nearest-neighbour tour from a random start, refined by 2-opt moves until
/// none shortens the open path. Returns a permutation of indices.
pub fn order_tsp<R: Rng>(points: &[[f64; 2]], rng: &mut R) -> Vec<usize> {
    let m = points.len();
    if m <= 1 {
        return (0..m).collect();
    }
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(m);
    let mut cur = rng.random_range(0..m);
    visited[cur] = true;
    order.push(cur);
    for _ in 1..m {
        let next = (0..m)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| dist(points[cur], points[a]).total_cmp(&dist(points[cur], points[b])))
            .expect("unvisited point remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    loop {
        let mut improved = false;
        for i in 0..m - 1 {
            for j in i + 1..m {
                // Reversing order[i..=j] swaps edges (i-1, i) and (j, j+1).
                let before_i = (i > 0).then(|| order[i - 1]);
                let after_j = (j + 1 < m).then(|| order[j + 1]);
                let old = before_i.map_or(0.0, |p| dist(points[p], points[order[i]]))
                    + after_j.map_or(0.0, |q| dist(points[order[j]], points[q]));
                let new = before_i.map_or(0.0, |p| dist(points[p], points[order[j]]))
                    + after_j.map_or(0.0, |q| dist(points[order[i]], points[q]));
                if new < old - 1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    order
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Whether the 8-connected step `(r, c) -> (r + dr, c + dc)` stays within
/// `passable`; diagonal steps may not cut a blocked corner.
fn step_ok(passable: &[bool], n: usize, r: usize, c: usize, dr: isize, dc: isize) -> Option<Cell> {
    let (r2, c2) = raster::offset(r, c, dr, dc, n)?;
    if !passable[r2 * n + c2] {
        return None;
    }
    if dr != 0 && dc != 0 && !(passable[r2 * n + c] && passable[r * n + c2]) {
        return None;
    }
    Some((r2, c2))
}

/// Minimum-cost path on the 8-connected grid (steps 1 and sqrt 2) through
/// `passable` cells, from `a` to `b` inclusive, with its cost.
pub fn grid_shortest_path(
    passable: &[bool],
    n: usize,
    a: Cell,
    b: Cell,
) -> Result<(Vec<Cell>, f64)> {
    let idx = |(r, c): Cell| r * n + c;
    if !passable[idx(a)] || !passable[idx(b)] {
        return Err(Error::Disconnected { from: a, to: b });
    }
    let mut cost = vec![f64::INFINITY; n * n];
    let mut parent = vec![usize::MAX; n * n];
    let mut heap = BinaryHeap::new();
    cost[idx(a)] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        cell: idx(a),
    });
    while let Some(Entry { cost: d, cell }) = heap.pop() {
        if cell == idx(b) {
            break;
        }
        if d > cost[cell] {
            continue;
        }
        let (r, c) = (cell / n, cell % n);
        for (dr, dc) in raster::N8 {
            if let Some(next) = step_ok(passable, n, r, c, dr, dc) {
                let step = if dr != 0 && dc != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let nd = d + step;
                let j = idx(next);
                if nd < cost[j] {
                    cost[j] = nd;
                    parent[j] = cell;
                    heap.push(Entry { cost: nd, cell: j });
                }
            }
        }
    }
    if cost[idx(b)].is_infinite() {
        return Err(Error::Disconnected { from: a, to: b });
    }
    let mut path = vec![b];
    let mut cur = idx(b);
    while cur != idx(a) {
        cur = parent[cur];
        path.push((cur / n, cur % n));
    }
    path.reverse();
    Ok((path, cost[idx(b)]))
}

/// Loop waypoints around every 4-connected furniture region: point `j`
/// lies one cell outside side `j mod 4` (top, right, bottom, left) of the
/// region's bounding box, uniformly along that side. Loops with a point
/// outside the free space are dropped.
pub fn furniture_loops<R: Rng>(gt: &Dfpg, loop_points: usize, rng: &mut R) -> Vec<Vec<Cell>> {
    let n = gt.n();
    let (label, sizes) = raster::components4(&gt.furniture_mask(), n);
    let mut bbox = vec![(usize::MAX, usize::MAX, 0usize, 0usize); sizes.len()];
    for (i, l) in label.iter().enumerate() {
        if let Some(k) = *l {
            let (r, c) = (i / n, i % n);
            let b = &mut bbox[k];
            *b = (b.0.min(r), b.1.min(c), b.2.max(r), b.3.max(c));
        }
    }
    let free = gt.free_mask();
    let mut loops = Vec::new();
    for (r0, c0, r1, c1) in bbox {
        let mut pts: Vec<Option<Cell>> = Vec::with_capacity(loop_points);
        for j in 0..loop_points {
            let p = match j % 4 {
                0 => r0.checked_sub(1).map(|r| (r, rng.random_range(c0..=c1))),
                1 => Some((rng.random_range(r0..=r1), c1 + 1)),
                2 => Some((r1 + 1, rng.random_range(c0..=c1))),
                _ => c0.checked_sub(1).map(|c| (rng.random_range(r0..=r1), c)),
            };
            pts.push(p.filter(|&(r, c)| r < n && c < n && free[r * n + c]));
        }
        if let Some(pts) = pts.into_iter().collect::<Option<Vec<Cell>>>() {
            loops.push(clockwise(pts, (r0, c0, r1, c1)));
        }
    }
    loops
}

/// Sorts ring points clockwise starting from the top side.
fn clockwise(mut pts: Vec<Cell>, (r0, _, r1, c1): (usize, usize, usize, usize)) -> Vec<Cell> {
    let key = |&(r, c): &Cell| -> (u8, isize) {
        if r + 1 == r0 {
            (0, c as isize)
        } else if c == c1 + 1 {
            (1, r as isize)
        } else if r == r1 + 1 {
            (2, -(c as isize))
        } else {
            (3, -(r as isize))
        }
    };
    pts.sort_by_key(key);
    pts
}

/// Index of the trajectory cell closest to `target` (first on ties).
fn nearest(cells: &[Cell], target: Cell) -> usize {
    let d =
        |a: Cell| (a.0 as f64 - target.0 as f64).powi(2) + (a.1 as f64 - target.1 as f64).powi(2);
    (0..cells.len())
        .min_by(|&i, &j| d(cells[i]).total_cmp(&d(cells[j])))
        .expect("non-empty")
}

fn append_path(route: &mut Vec<Cell>, path: &[Cell]) {
    for &p in path {
        if route.last() != Some(&p) {
            route.push(p);
        }
    }
}

/// Splices an out-and-back excursion `route[at] -> ... -> route[at]` into
/// the route.
fn splice(route: &mut Vec<Cell>, at: usize, excursion: Vec<Cell>) {
    let tail = route.split_off(at + 1);
    append_path(route, &excursion);
    append_path(route, &tail);
}

/// The free interior cell next to the middle segment of each door.
pub fn door_targets(gt: &Dfpg) -> Vec<Cell> {
    let n = gt.n();
    gt.door_runs()
        .iter()
        .filter_map(|run| {
            let id = run[run.len() / 2];
            id.incident_cells(n)
                .into_iter()
                .flatten()
                .find(|&(r, c)| gt.cell(r, c) == CellLabel::In)
        })
        .collect()
}

pub fn simulate_walk(gt: &Dfpg, cfg: &SimConfig) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_walk_with(gt, cfg, &mut rng)
}

pub fn simulate_walk_with<R: Rng>(gt: &Dfpg, cfg: &SimConfig, rng: &mut R) -> Result<Trajectory> {
    cfg.validate()?;
    let n = gt.n();
    let free = gt.free_mask();
    if !free.iter().any(|&f| f) {
        return Err(Error::NoFreeSpace);
    }
    let buffered = raster::largest_component(&raster::erode8(&free, n, cfg.wall_buffer_cells), n);
    if !buffered.iter().any(|&f| f) {
        return Err(Error::NoFreeSpace);
    }
    let occupied: Vec<bool> = free.iter().map(|&f| !f).collect();
    let samples = stratified_samples(
        &CellMap::from_mask(n, &buffered),
        &CellMap::from_mask(n, &occupied),
        cfg.block_cells(gt.grid()),
        rng,
    )?;
    let centers: Vec<[f64; 2]> = samples.iter().map(|&(r, c)| [c as f64, r as f64]).collect();
    let order = order_tsp(&centers, rng);
    let mut route = vec![samples[order[0]]];
    for w in order.windows(2) {
        let (path, _) = grid_shortest_path(&buffered, n, samples[w[0]], samples[w[1]])?;
        append_path(&mut route, &path);
    }
    for lp in furniture_loops(gt, cfg.loop_points, rng) {
        let (mut best, mut at) = (f64::INFINITY, (0, 0));
        for (k, &p) in lp.iter().enumerate() {
            let t = nearest(&route, p);
            let d =
                (route[t].0 as f64 - p.0 as f64).powi(2) + (route[t].1 as f64 - p.1 as f64).powi(2);
            if d < best {
                best = d;
                at = (t, k);
            }
        }
        let (t, k) = at;
        let (to_loop, _) = grid_shortest_path(&free, n, route[t], lp[k])?;
        let mut excursion = to_loop.clone();
        for j in 1..=lp.len() {
            let (leg, _) =
                grid_shortest_path(&free, n, lp[(k + j - 1) % lp.len()], lp[(k + j) % lp.len()])?;
            append_path(&mut excursion, &leg);
        }
        append_path(
            &mut excursion,
            &to_loop.iter().rev().copied().collect::<Vec<_>>(),
        );
        splice(&mut route, t, excursion);
    }
    for target in door_targets(gt) {
        let t = nearest(&route, target);
        let (leg, _) = grid_shortest_path(&free, n, route[t], target)?;
        let mut excursion = leg.clone();
        append_path(
            &mut excursion,
            &leg.iter().rev().copied().collect::<Vec<_>>(),
        );
        splice(&mut route, t, excursion);
    }
    if route.len() == 1 {
        route.push(route[0]);
    }
    let grid = gt.grid();
    Ok(Trajectory::new(
        route.iter().map(|&(r, c)| grid.cell_center(r, c)).collect(),
    ))
}

/// Whether every point of `traj` lies in a free cell of `gt`.
pub fn in_free_space(gt: &Dfpg, traj: &Trajectory) -> bool {
    let grid = gt.grid();
    traj.points.iter().all(|&p| {
        let (r, c) = grid.cell_of(p);
        gt.cell(r, c) == CellLabel::In
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfpg::GridSpec;

    fn perms(m: usize) -> Vec<Vec<usize>> {
        if m == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(m - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, m - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_tsp(points: &[[f64; 2]]) -> f64 {
        perms(points.len())
            .iter()
            .map(|p| path_length(points, p))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn tsp_small_cases_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(order_tsp(&[[3.0, 4.0]], &mut rng), vec![0]);
        let collinear = [[2.0, 0.0], [0.0, 0.0], [1.0, 0.0]];
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let o = order_tsp(&collinear, &mut rng);
            assert_eq!(path_length(&collinear, &o), brute_tsp(&collinear));
            assert_eq!(path_length(&collinear, &o), 2.0);
        }
        let square = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let o = order_tsp(&square, &mut rng);
            assert_eq!(path_length(&square, &o), 3.0);
            assert_eq!(brute_tsp(&square), 3.0);
        }
    }

    /// Relaxes all 8-connected moves until nothing changes.
    fn bellman_ford(passable: &[bool], n: usize, a: Cell) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; n * n];
        d[a.0 * n + a.1] = 0.0;
        loop {
            let mut changed = false;
            for i in 0..n * n {
                if d[i].is_infinite() {
                    continue;
                }
                for (dr, dc) in raster::N8 {
                    if let Some((r2, c2)) = step_ok(passable, n, i / n, i % n, dr, dc) {
                        let w = if dr != 0 && dc != 0 {
                            std::f64::consts::SQRT_2
                        } else {
                            1.0
                        };
                        if d[i] + w < d[r2 * n + c2] - 1e-12 {
                            d[r2 * n + c2] = d[i] + w;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }

    #[test]
    fn shortest_path_examples() {
        let n = 5;
        let open = vec![true; n * n];
        let (p, cost) = grid_shortest_path(&open, n, (2, 2), (2, 2)).unwrap();
        assert_eq!((p, cost), (vec![(2, 2)], 0.0));
        let mut corridor = vec![false; n * n];
        for c in 0..5 {
            corridor[2 * n + c] = true;
        }
        let (p, cost) = grid_shortest_path(&corridor, n, (2, 0), (2, 4)).unwrap();
        assert_eq!(p, (0..5).map(|c| (2, c)).collect::<Vec<_>>());
        assert_eq!(cost, 4.0);
        let mut blocked = open.clone();
        blocked[2 * n + 2] = false;
        let (p, cost) = grid_shortest_path(&blocked, n, (2, 0), (2, 4)).unwrap();
        assert!((cost - bellman_ford(&blocked, n, (2, 0))[2 * n + 4]).abs() < 1e-12);
        assert!(p.iter().all(|&(r, c)| blocked[r * n + c]));
        let mut wall = open.clone();
        for r in 0..n {
            wall[r * n + 2] = false;
        }
        assert!(matches!(
            grid_shortest_path(&wall, n, (0, 0), (0, 4)),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn monte_carlo_distance_weighting() {
        // Column 0 occupied; eligible cells at distances 1 and 3.
        let n = 8;
        let occupied = CellMap::from_fn(n, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let mut free = CellMap::zeros(n);
        free.set(3, 1, 1.0);
        free.set(3, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut far = 0;
        let draws = 10_000;
        for _ in 0..draws {
            let s = stratified_samples(&free, &occupied, 8, &mut rng).unwrap();
            assert_eq!(s.len(), 1);
            if s[0] == (3, 3) {
                far += 1;
            }
        }
        let ratio = far as f64 / (draws - far) as f64;
        assert!((ratio - 3.0).abs() / 3.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn stratification_limits_one_sample_per_block() {
        let n = 8;
        let free = CellMap::from_fn(n, |r, c| {
            f64::from(u8::from(r < 4 && c >= 4 || (r, c) == (6, 1)))
        });
        let occupied = CellMap::zeros(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = stratified_samples(&free, &occupied, 4, &mut rng).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(&(6, 1)));
        assert!(matches!(
            stratified_samples(&CellMap::zeros(n), &occupied, 4, &mut rng),
            Err(Error::NoFreeSpace)
        ));
    }

    fn room_with(furniture: &[Cell]) -> Dfpg {
        let n = 12;
        let inside: Vec<bool> = (0..n * n)
            .map(|i| (1..11).contains(&(i / n)) && (1..11).contains(&(i % n)))
            .collect();
        let mut g = Dfpg::from_interior(GridSpec::new(n, 0.25).unwrap(), &inside);
        for &(r, c) in furniture {
            g.set_cell(r, c, CellLabel::Furn);
        }
        g
    }

    #[test]
    fn loops_follow_the_drop_rule() {
        // Regions: 1x1 at (3,3) and (7,7) free-standing; 1x1 at (1,6) against
        // the top wall. Every side has one candidate cell, so the sampler is
        // fully determined.
        let g = room_with(&[(3, 3), (7, 7), (1, 6)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let loops = furniture_loops(&g, 4, &mut rng);
        assert_eq!(
            loops,
            vec![
                vec![(2, 3), (3, 4), (4, 3), (3, 2)],
                vec![(6, 7), (7, 8), (8, 7), (7, 6)],
            ]
        );
    }

    #[test]
    fn walk_reaches_doors_and_avoids_furniture() {
        let mut g = room_with(&[(4, 4), (4, 5), (5, 4), (5, 5)]);
        for col in 3..7 {
            g.set_segment(
                crate::dfpg::SegmentId::H { row: 1, col },
                crate::dfpg::SegmentLabel::Door,
            );
        }
        let t = simulate_walk(&g, &SimConfig::with_seed(3)).unwrap();
        assert!(in_free_space(&g, &t));
        let door_cell = g.grid().cell_center(1, 5);
        assert!(t.points.contains(&door_cell));
        assert_eq!(t, simulate_walk(&g, &SimConfig::with_seed(3)).unwrap());
        for w in t.points.windows(2) {
            let step = ((w[0][0] - w[1][0]).abs().max((w[0][1] - w[1][1]).abs()) / 0.25).round();
            assert_eq!(step, 1.0);
        }
    }
}
