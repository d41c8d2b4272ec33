//! Procedural single-room ground truth: a rectangle minus rectangular
//! notches, width-4 doors on straight wall runs, and rectangular furniture.

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundgraph::{check_single_room, extract_boundary_loop, BoundaryLoop};
use crate::dfpg::{CellLabel, CellMap, Dfpg, GridSpec, SegmentLabel};
use crate::error::{Error, Result};
use crate::raster;

pub const DOOR_WIDTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub min_side_m: f64,
    pub max_side_m: f64,
    pub max_concavities: usize,
    /// Inclusive.
    pub door_count_range: (usize, usize),
    /// Inclusive.
    pub furniture_count_range: (usize, usize),
    pub min_furniture_side_m: f64,
    pub max_furniture_side_m: f64,
    /// Chance that a furniture block is pushed against a wall.
    pub wall_furniture_prob: f64,
    /// Require the free space shrunk by one cell to stay connected, so a
    /// simulated walk can reach all of it away from walls.
    pub walk_clearance: bool,
    pub max_retries: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec::default(),
            min_side_m: 3.0,
            max_side_m: 10.0,
            max_concavities: 3,
            door_count_range: (1, 3),
            furniture_count_range: (1, 6),
            min_furniture_side_m: 0.5,
            max_furniture_side_m: 2.0,
            wall_furniture_prob: 0.7,
            walk_clearance: true,
            max_retries: 100,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn cells(&self, m: f64) -> usize {
        (m / self.grid.cell_size_m).round() as usize
    }

    /// Side range in cells.
    fn side_range(&self) -> (usize, usize) {
        (
            self.cells(self.min_side_m),
            self.cells(self.max_side_m)
                .min(self.grid.n.saturating_sub(2)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.side_range();
        let (flo, fhi) = (
            self.cells(self.min_furniture_side_m),
            self.cells(self.max_furniture_side_m),
        );
        let ok = self.min_side_m >= 3.0
            && lo >= 1
            && lo <= hi
            && self.door_count_range.0 >= 1
            && self.door_count_range.0 <= self.door_count_range.1
            && self.furniture_count_range.0 >= 1
            && self.furniture_count_range.0 <= self.furniture_count_range.1
            && flo >= 1
            && flo <= fhi
            && (0.0..=1.0).contains(&self.wall_furniture_prob)
            && self.max_retries > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("generator: {self:?}")))
        }
    }
}

/// A rectangle `[r0, r0+h) x [c0, c0+w)`.
#[derive(Clone, Copy, Debug)]
struct Rect {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
}

impl Rect {
    fn cells(self) -> impl Iterator<Item = (usize, usize)> {
        (self.r0..self.r0 + self.h)
            .flat_map(move |r| (self.c0..self.c0 + self.w).map(move |c| (r, c)))
    }
}

fn footprint(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = cfg.grid.n;
    let (lo, hi) = cfg.side_range();
    let h = rng.random_range(lo..=hi);
    let w = rng.random_range(lo..=hi);
    let r0 = rng.random_range(1..=n - 1 - h);
    let c0 = rng.random_range(1..=n - 1 - w);
    let mut mask = vec![false; n * n];
    for (r, c) in (Rect { r0, c0, h, w }).cells() {
        mask[r * n + c] = true;
    }
    let notches = rng.random_range(0..=cfg.max_concavities);
    for _ in 0..notches {
        // Depth and width up to half the side, at least two cells.
        let nh = rng.random_range(2..=(h / 2).max(2));
        let nw = rng.random_range(2..=(w / 2).max(2));
        let (nr, nc) = match rng.random_range(0..8) {
            0 => (r0, c0),
            1 => (r0, c0 + w - nw),
            2 => (r0 + h - nh, c0),
            3 => (r0 + h - nh, c0 + w - nw),
            // Edge notches keep at least two cells of wall on either side.
            4 if w >= nw + 4 => (r0, rng.random_range(c0 + 2..=c0 + w - nw - 2)),
            5 if w >= nw + 4 => (r0 + h - nh, rng.random_range(c0 + 2..=c0 + w - nw - 2)),
            6 if h >= nh + 4 => (rng.random_range(r0 + 2..=r0 + h - nh - 2), c0),
            7 if h >= nh + 4 => (rng.random_range(r0 + 2..=r0 + h - nh - 2), c0 + w - nw),
            _ => continue,
        };
        for (r, c) in (Rect {
            r0: nr,
            c0: nc,
            h: nh,
            w: nw,
        })
        .cells()
        {
            mask[r * n + c] = false;
        }
    }
    mask
}

/// Loop positions of the `DOOR_WIDTH` segments of each placed door.
fn place_doors(lp: &BoundaryLoop, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let len = lp.len();
    let mut candidates: Vec<usize> = Vec::new();
    for (start, run) in lp.straight_runs() {
        if run >= DOOR_WIDTH {
            candidates.extend((0..=run - DOOR_WIDTH).map(|k| (start + k) % len));
        }
    }
    candidates.shuffle(rng);
    let mut taken = vec![false; len];
    let mut doors = Vec::new();
    for s in candidates {
        if doors.len() == count {
            break;
        }
        // The door plus one wall segment on each side must be free.
        if (0..DOOR_WIDTH + 2).any(|k| taken[(s + len - 1 + k) % len]) {
            continue;
        }
        let door: Vec<usize> = (0..DOOR_WIDTH).map(|k| (s + k) % len).collect();
        for &i in &door {
            taken[i] = true;
        }
        doors.push(door);
    }
    doors
}

fn free_ok(dfpg: &Dfpg, clearance: bool) -> bool {
    let n = dfpg.n();
    let free = dfpg.free_mask();
    if raster::count_components4(&free, n) != 1 {
        return false;
    }
    if clearance {
        let eroded = raster::erode8(&free, n, 1);
        if raster::count_components4(&eroded, n) != 1 {
            return false;
        }
    }
    true
}

fn place_furniture(
    dfpg: &mut Dfpg,
    cfg: &GenConfig,
    blocked: &[bool],
    rng: &mut ChaCha8Rng,
) -> usize {
    let n = dfpg.n();
    let target = rng.random_range(cfg.furniture_count_range.0..=cfg.furniture_count_range.1);
    let (flo, fhi) = (
        cfg.cells(cfg.min_furniture_side_m),
        cfg.cells(cfg.max_furniture_side_m),
    );
    let interior: Vec<(usize, usize)> = (0..n * n)
        .filter(|&i| dfpg.cells()[i] == CellLabel::In)
        .map(|i| (i / n, i % n))
        .collect();
    let mut placed = 0;
    for _ in 0..target * 30 {
        if placed == target {
            break;
        }
        let h = rng.random_range(flo..=fhi);
        let w = rng.random_range(flo..=fhi);
        let (mut r, mut c) = interior[rng.random_range(0..interior.len())];
        let inside = |r: isize, c: isize| {
            r >= 0
                && c >= 0
                && (r as usize) < n
                && (c as usize) < n
                && dfpg.cell(r as usize, c as usize).is_interior()
        };
        let fits = |r: usize, c: usize| {
            r + h <= n
                && c + w <= n
                && (Rect { r0: r, c0: c, h, w })
                    .cells()
                    .all(|(rr, cc)| inside(rr as isize, cc as isize))
        };
        if !fits(r, c) {
            continue;
        }
        if rng.random_bool(cfg.wall_furniture_prob) {
            let (dr, dc) = raster::N4[rng.random_range(0..4)];
            loop {
                let (r2, c2) = (r as isize + dr, c as isize + dc);
                if r2 < 0 || c2 < 0 || !fits(r2 as usize, c2 as usize) {
                    break;
                }
                (r, c) = (r2 as usize, c2 as usize);
            }
        }
        let rect = Rect { r0: r, c0: c, h, w };
        // Keep a one-cell gap to other furniture and away from door cells.
        let clash = (rect.r0.saturating_sub(1)..(rect.r0 + h + 1).min(n))
            .flat_map(|rr| {
                (rect.c0.saturating_sub(1)..(rect.c0 + w + 1).min(n)).map(move |cc| (rr, cc))
            })
            .any(|(rr, cc)| dfpg.cell(rr, cc) == CellLabel::Furn);
        if clash || rect.cells().any(|(rr, cc)| blocked[rr * n + cc]) {
            continue;
        }
        let mut trial = dfpg.clone();
        for (rr, cc) in rect.cells() {
            trial.set_cell(rr, cc, CellLabel::Furn);
        }
        if free_ok(&trial, cfg.walk_clearance) {
            *dfpg = trial;
            placed += 1;
        }
    }
    placed
}

fn attempt(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> std::result::Result<Dfpg, &'static str> {
    let n = cfg.grid.n;
    let mask = footprint(cfg, rng);
    let lp = extract_boundary_loop(&CellMap::from_mask(n, &mask))
        .map_err(|_| "footprint is not simple")?;
    let mut dfpg = Dfpg::from_interior(cfg.grid, &mask);
    if !free_ok(&dfpg, cfg.walk_clearance) {
        return Err("footprint too narrow");
    }
    let want = rng.random_range(cfg.door_count_range.0..=cfg.door_count_range.1);
    let doors = place_doors(&lp, want, rng);
    if doors.is_empty() {
        return Err("no wall run hosts a door");
    }
    let mut blocked = vec![false; n * n];
    for door in &doors {
        for &i in door {
            dfpg.set_segment(lp.segment(i).id, SegmentLabel::Door);
            let (r, c) = lp.segment(i).interior_cell();
            for (dr, dc) in raster::N8.iter().chain(&[(0, 0)]) {
                if let Some((r2, c2)) = raster::offset(r, c, *dr, *dc, n) {
                    blocked[r2 * n + c2] = true;
                }
            }
        }
    }
    if place_furniture(&mut dfpg, cfg, &blocked, rng) == 0 {
        return Err("no furniture fits");
    }
    Ok(dfpg)
}

/// Generates one valid room, deterministically from `cfg.seed`.
pub fn generate_room(cfg: &GenConfig) -> Result<Dfpg> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last = "";
    for k in 0..cfg.max_retries {
        match attempt(cfg, &mut rng) {
            Ok(room) => {
                debug!("seed {}: room after {} attempts", cfg.seed, k + 1);
                return Ok(room);
            }
            Err(reason) => last = reason,
        }
    }
    Err(Error::GenerationFailed {
        attempts: cfg.max_retries,
        reason: last.to_string(),
    })
}

/// Full ground-truth validity check used by tests and dataset builds.
pub fn check_room(g: &Dfpg) -> Result<()> {
    let lp = check_single_room(g)?;
    let n = g.n();
    let labels = lp.labels_from(g);
    if !labels.contains(&SegmentLabel::Door) {
        return Err(Error::InvalidDfpg("no door".into()));
    }
    if !g.cells().contains(&CellLabel::Furn) {
        return Err(Error::InvalidDfpg("no furniture".into()));
    }
    if raster::count_components4(&g.free_mask(), n) != 1 {
        return Err(Error::InvalidDfpg("free space not 4-connected".into()));
    }
    for run in g.door_runs() {
        if run.len() != DOOR_WIDTH {
            return Err(Error::InvalidDfpg(format!("door of width {}", run.len())));
        }
        let any_free = run.iter().any(|id| {
            id.incident_cells(n)
                .into_iter()
                .flatten()
                .any(|(r, c)| g.cell(r, c) == CellLabel::In)
        });
        if !any_free {
            return Err(Error::InvalidDfpg("door without free interior cell".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_room() {
        let a = generate_room(&GenConfig::with_seed(7)).unwrap();
        let b = generate_room(&GenConfig::with_seed(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_room(&GenConfig::with_seed(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rectangles_only_without_concavities() {
        for seed in 0..20 {
            let cfg = GenConfig {
                max_concavities: 0,
                ..GenConfig::with_seed(seed)
            };
            let g = generate_room(&cfg).unwrap();
            let lp = check_single_room(&g).unwrap();
            assert_eq!(lp.corners().len(), 4);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = GenConfig {
            min_side_m: 2.0,
            ..GenConfig::default()
        };
        assert!(matches!(generate_room(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn infeasible_grid_fails_after_retries() {
        // A 12x12 room cannot hold a 12x12 block and keep free space.
        let cfg = GenConfig {
            grid: GridSpec::new(14, 0.25).unwrap(),
            door_count_range: (1, 1),
            furniture_count_range: (1, 1),
            min_furniture_side_m: 3.0,
            max_furniture_side_m: 3.0,
            max_retries: 5,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_room(&cfg),
            Err(Error::GenerationFailed { attempts: 5, .. })
        ));
    }
}
