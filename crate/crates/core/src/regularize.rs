//! Post-processing of raw network outputs: MRF smoothing by exact min-cut,
//! connectivity repair, isolated-label cleanup and door-width normalization.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::boundgraph::{extract_boundary_loop, BoundaryLoop};
use crate::dfpg::{CellMap, SegmentLabel};
use crate::error::{Error, Result};
use crate::raster;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrfConfig {
    /// Cost of turning a predicted-IN cell into OUT.
    pub gamma_in_to_out: f64,
    /// Cost of turning a predicted-OUT cell into IN.
    pub gamma_out_to_in: f64,
    /// Cost per pair of 4-adjacent cells with different labels.
    pub gamma_border: f64,
}

impl Default for MrfConfig {
    fn default() -> Self {
        Self {
            gamma_in_to_out: 4.0,
            gamma_out_to_in: 1.0,
            gamma_border: 2.0,
        }
    }
}

impl MrfConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.gamma_in_to_out,
            self.gamma_out_to_in,
            self.gamma_border,
        ]
        .iter()
        .all(|g| *g >= 0.0 && g.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("MRF penalties {self:?}")))
        }
    }
}

/// Energy of `labels` given the prediction `pred` (both binary, row-major).
pub fn mrf_energy(pred: &[bool], labels: &[bool], n: usize, cfg: &MrfConfig) -> f64 {
    let mut e = 0.0;
    for (&p, &l) in pred.iter().zip(labels) {
        if p && !l {
            e += cfg.gamma_in_to_out;
        } else if !p && l {
            e += cfg.gamma_out_to_in;
        }
    }
    for r in 0..n {
        for c in 0..n {
            let l = labels[r * n + c];
            if c + 1 < n && l != labels[r * n + c + 1] {
                e += cfg.gamma_border;
            }
            if r + 1 < n && l != labels[(r + 1) * n + c] {
                e += cfg.gamma_border;
            }
        }
    }
    e
}

/// Dinic max-flow on a small dense-ish graph with `f64` capacities.
struct FlowGraph {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

const NONE: usize = usize::MAX;
const EPS: f64 = 1e-12;

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        Self {
            head: vec![NONE; nodes],
            next: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap_uv: f64, cap_vu: f64) {
        for (a, b, c) in [(u, v, cap_uv), (v, u, cap_vu)] {
            self.to.push(b);
            self.cap.push(c);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![NONE; self.head.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let mut e = self.head[u];
            while e != NONE {
                let v = self.to[e];
                if self.cap[e] > EPS && level[v] == NONE {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
                e = self.next[e];
            }
        }
        level
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        pushed: f64,
        level: &[usize],
        iter: &mut [usize],
    ) -> f64 {
        if u == t {
            return pushed;
        }
        while iter[u] != NONE {
            let e = iter[u];
            let v = self.to[e];
            if self.cap[e] > EPS && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, iter);
                if got > EPS {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            iter[u] = self.next[e];
        }
        0.0
    }

    /// Runs max-flow and returns the source side of the minimum cut.
    fn min_cut(&mut self, s: usize, t: usize) -> Vec<bool> {
        loop {
            let level = self.levels(s);
            if level[t] == NONE {
                return level.iter().map(|&l| l != NONE).collect();
            }
            let mut iter = self.head.clone();
            while self.augment(s, t, f64::INFINITY, &level, &mut iter) > EPS {}
        }
    }
}

/// Globally optimal binary labeling under the Potts-smoothed energy
/// (see [`mrf_energy`]), via one s-t minimum cut. Source side = IN.
pub fn mrf_smooth(pred: &CellMap, cfg: &MrfConfig) -> Result<CellMap> {
    cfg.validate()?;
    if !pred.is_binary() {
        return Err(Error::Shape("MRF input must be binary".into()));
    }
    let n = pred.n();
    let p = pred.to_mask();
    let (s, t) = (n * n, n * n + 1);
    let mut g = FlowGraph::new(n * n + 2);
    for (i, &inside) in p.iter().enumerate() {
        // Cutting s->i labels i OUT; cutting i->t labels i IN.
        let (cost_out, cost_in) = if inside {
            (cfg.gamma_in_to_out, 0.0)
        } else {
            (0.0, cfg.gamma_out_to_in)
        };
        if cost_out > 0.0 {
            g.add_edge(s, i, cost_out, 0.0);
        }
        if cost_in > 0.0 {
            g.add_edge(i, t, cost_in, 0.0);
        }
    }
    if cfg.gamma_border > 0.0 {
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                if c + 1 < n {
                    g.add_edge(i, i + 1, cfg.gamma_border, cfg.gamma_border);
                }
                if r + 1 < n {
                    g.add_edge(i, i + n, cfg.gamma_border, cfg.gamma_border);
                }
            }
        }
    }
    let side = g.min_cut(s, t);
    Ok(CellMap::from_mask(n, &side[..n * n]))
}

/// Largest 4-connected IN component with its holes filled. Any diagonal
/// pinch left after this would enclose an OUT hole, so the boundary of the
/// result is a single simple loop.
pub fn repair_connectivity(mask: &CellMap) -> Result<CellMap> {
    let n = mask.n();
    let m = mask.to_mask();
    if !m.iter().any(|&v| v) {
        return Err(Error::NoInterior { probability: None });
    }
    let out = CellMap::from_mask(n, &raster::fill_holes(&raster::largest_component(&m, n), n));
    debug_assert!(extract_boundary_loop(&out).is_ok());
    Ok(out)
}

/// Relabels every `target` cell with no 4-neighbour of the same value
/// (one simultaneous pass).
pub fn clean_isolated_cells(map: &CellMap, target: bool) -> CellMap {
    let n = map.n();
    let m = map.to_mask();
    let out: Vec<bool> = (0..n * n)
        .map(|i| {
            if m[i] != target {
                return m[i];
            }
            let (r, c) = (i / n, i % n);
            let has_twin = raster::N4.iter().any(|&(dr, dc)| {
                raster::offset(r, c, dr, dc, n).is_some_and(|(r2, c2)| m[r2 * n + c2] == target)
            });
            if has_twin {
                m[i]
            } else {
                !target
            }
        })
        .collect();
    CellMap::from_mask(n, &out)
}

/// A DOOR node whose previous and next nodes are both WALL becomes WALL
/// (one simultaneous pass around the loop).
pub fn clean_isolated_door_nodes(labels: &[SegmentLabel]) -> Vec<SegmentLabel> {
    let len = labels.len();
    (0..len)
        .map(|i| {
            let prev = labels[(i + len - 1) % len];
            let next = labels[(i + 1) % len];
            if labels[i] == SegmentLabel::Door
                && prev == SegmentLabel::Wall
                && next == SegmentLabel::Wall
            {
                SegmentLabel::Wall
            } else {
                labels[i]
            }
        })
        .collect()
}

/// Maximal circular runs of DOOR positions, as (start, length).
pub fn door_runs_on_loop(labels: &[SegmentLabel]) -> Vec<(usize, usize)> {
    let len = labels.len();
    let is_door = |i: usize| labels[i % len] == SegmentLabel::Door;
    if len == 0 || !labels.contains(&SegmentLabel::Door) {
        return Vec::new();
    }
    if labels.iter().all(|&l| l == SegmentLabel::Door) {
        return vec![(0, len)];
    }
    let mut runs = Vec::new();
    for s in 0..len {
        if is_door(s) && !is_door(s + len - 1) {
            let mut l = 0;
            while is_door(s + l) {
                l += 1;
            }
            runs.push((s, l));
        }
    }
    runs
}

/// Resizes every door to `width` segments along its straight wall run.
///
/// Door runs are first split at corners. Each piece is re-centred with
/// start offset `o + floor((L - width) / 2)` and clamped to its wall run
/// (a run shorter than `width` becomes a door entirely). Pieces are placed
/// longest first; a piece that would touch an already placed door along
/// the loop is moved to the nearest free offset in its run, or dropped.
pub fn normalize_door_width(
    labels: &[SegmentLabel],
    lp: &BoundaryLoop,
    width: usize,
) -> Result<Vec<SegmentLabel>> {
    let len = lp.len();
    if labels.len() != len {
        return Err(Error::Shape(format!(
            "{} labels for a loop of {len}",
            labels.len()
        )));
    }
    if width == 0 {
        return Err(Error::Config("door width 0".into()));
    }
    let runs = lp.straight_runs();
    let run_of = lp.run_ids();
    // (length, loop start, run index, offset in run)
    let mut pieces = Vec::new();
    for (start, l) in door_runs_on_loop(labels) {
        let mut k = 0;
        while k < l {
            let pos = (start + k) % len;
            let run = run_of[pos];
            let offset = (pos + len - runs[run].0) % len;
            let mut piece = 1;
            while k + piece < l && run_of[(start + k + piece) % len] == run {
                piece += 1;
            }
            pieces.push((piece, pos, run, offset));
            k += piece;
        }
    }
    pieces.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out = vec![SegmentLabel::Wall; len];
    let mut blocked = vec![false; len];
    for (l, _, run, offset) in pieces {
        let (run_start, run_len) = runs[run];
        let w = width.min(run_len);
        let ideal = (offset as i64 + ((l as i64 - width as i64) as f64 / 2.0).floor() as i64)
            .clamp(0, (run_len - w) as i64);
        let free_at = |o: usize| (0..w).all(|j| !blocked[(run_start + o + j) % len]);
        let mut candidates: Vec<usize> = (0..=run_len - w).collect();
        candidates.sort_by_key(|&o| ((o as i64 - ideal).abs(), o));
        let Some(o) = candidates.into_iter().find(|&o| free_at(o)) else {
            continue;
        };
        for j in 0..w {
            out[(run_start + o + j) % len] = SegmentLabel::Door;
        }
        for j in 0..w + 2 {
            blocked[(run_start + o + j + len - 1) % len] = true;
        }
    }
    Ok(out)
}

/// Exhaustive minimum energy over all 2^16 labelings of a 4x4 grid. Bit
/// `r * 4 + c` of `pred` is cell `(r, c)`. Reference for [`mrf_smooth`].
pub fn exhaustive_min_energy_4x4(pred: u16, cfg: &MrfConfig) -> f64 {
    // Cells with a right neighbour, and cells with a lower neighbour.
    const H: u16 = 0b0111_0111_0111_0111;
    const V: u16 = 0x0fff;
    (0..=u16::MAX)
        .map(|l| {
            let data = (pred & !l).count_ones() as f64 * cfg.gamma_in_to_out
                + (!pred & l).count_ones() as f64 * cfg.gamma_out_to_in;
            let pairs = ((l ^ (l >> 1)) & H).count_ones() + ((l ^ (l >> 4)) & V).count_ones();
            data + pairs as f64 * cfg.gamma_border
        })
        .fold(f64::INFINITY, f64::min)
}
