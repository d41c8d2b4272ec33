//! The discrete floor plan grid: labeled cells plus labeled horizontal and
//! vertical segments between them, and the raster maps derived from it.
//!
//! Layout is row-major with row 0 at the top. Cell `(r, c)` spans
//! `[c, c+1] x [r, r+1]` in cell units; metric coordinates are `x = col *
//! cell_size_m`, `y = row * cell_size_m`, so `y` grows down the rows.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N: usize = 64;
pub const DEFAULT_CELL_SIZE_M: f64 = 0.25;
pub const DEFAULT_CUTOFF_M: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum CellLabel {
    #[default]
    Out,
    In,
    Furn,
}

impl CellLabel {
    pub fn code(self) -> char {
        match self {
            CellLabel::Out => 'O',
            CellLabel::In => 'I',
            CellLabel::Furn => 'F',
        }
    }

    pub fn from_code(ch: char) -> Option<Self> {
        match ch {
            'O' => Some(CellLabel::Out),
            'I' => Some(CellLabel::In),
            'F' => Some(CellLabel::Furn),
            _ => None,
        }
    }

    /// Inside the footprint (IN or FURN).
    pub fn is_interior(self) -> bool {
        self != CellLabel::Out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum SegmentLabel {
    Door,
    Wall,
    #[default]
    None,
}

impl SegmentLabel {
    pub fn code(self) -> char {
        match self {
            SegmentLabel::Door => 'D',
            SegmentLabel::Wall => 'W',
            SegmentLabel::None => 'N',
        }
    }

    pub fn from_code(ch: char) -> Option<Self> {
        match ch {
            'D' => Some(SegmentLabel::Door),
            'W' => Some(SegmentLabel::Wall),
            'N' => Some(SegmentLabel::None),
            _ => None,
        }
    }

    pub fn is_boundary(self) -> bool {
        self != SegmentLabel::None
    }
}

/// Grid side length and metric cell size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub cell_size_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            cell_size_m: DEFAULT_CELL_SIZE_M,
        }
    }
}

impl GridSpec {
    pub fn new(n: usize, cell_size_m: f64) -> Result<Self> {
        if n == 0 || !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(Error::Config(format!(
                "grid n={n}, cell size {cell_size_m}"
            )));
        }
        Ok(Self { n, cell_size_m })
    }

    pub fn extent_m(&self) -> f64 {
        self.n as f64 * self.cell_size_m
    }

    /// Metric center of cell `(r, c)`.
    pub fn cell_center(&self, r: usize, c: usize) -> [f64; 2] {
        [
            (c as f64 + 0.5) * self.cell_size_m,
            (r as f64 + 0.5) * self.cell_size_m,
        ]
    }

    /// Cell containing a metric point (clamped to the grid).
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let clamp = |v: f64| ((v / self.cell_size_m).floor().max(0.0) as usize).min(self.n - 1);
        (clamp(p[1]), clamp(p[0]))
    }
}

/// A horizontal segment `H` is the top edge of cell `(row, col)` (`row` in
/// `0..=n`); a vertical segment `V` is the left edge of cell `(row, col)`
/// (`col` in `0..=n`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentId {
    H { row: usize, col: usize },
    V { row: usize, col: usize },
}

impl SegmentId {
    pub fn is_horizontal(self) -> bool {
        matches!(self, SegmentId::H { .. })
    }

    /// Lattice endpoints `(x, y)` in cell units, in increasing coordinate order.
    pub fn endpoints(self) -> ([usize; 2], [usize; 2]) {
        match self {
            SegmentId::H { row, col } => ([col, row], [col + 1, row]),
            SegmentId::V { row, col } => ([col, row], [col, row + 1]),
        }
    }

    /// Midpoint `(x, y)` in cell units.
    pub fn midpoint(self) -> [f64; 2] {
        match self {
            SegmentId::H { row, col } => [col as f64 + 0.5, row as f64],
            SegmentId::V { row, col } => [col as f64, row as f64 + 0.5],
        }
    }

    /// The two incident cells (above/below or left/right); `None` beyond the grid.
    pub fn incident_cells(self, n: usize) -> [Option<(usize, usize)>; 2] {
        match self {
            SegmentId::H { row, col } => [
                row.checked_sub(1).map(|r| (r, col)),
                (row < n).then_some((row, col)),
            ],
            SegmentId::V { row, col } => [
                col.checked_sub(1).map(|c| (row, c)),
                (col < n).then_some((row, col)),
            ],
        }
    }

    pub fn in_grid(self, n: usize) -> bool {
        match self {
            SegmentId::H { row, col } => row <= n && col < n,
            SegmentId::V { row, col } => row < n && col <= n,
        }
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentId::H { row, col } => write!(f, "h({row},{col})"),
            SegmentId::V { row, col } => write!(f, "v({row},{col})"),
        }
    }
}

/// A scalar field over the `n x n` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMap {
    n: usize,
    data: Vec<f64>,
}

impl CellMap {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{n} map",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Self { n, data }
    }

    pub fn from_mask(n: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), n * n, "mask size");
        Self {
            n,
            data: mask.iter().map(|&b| f64::from(u8::from(b))).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Cells with value > 0.5.
    pub fn to_mask(&self) -> Vec<bool> {
        self.data.iter().map(|&v| v > 0.5).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.5).count()
    }
}

/// An ordered polyline of metric points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks length >= 2 and that all points lie in the grid extent.
    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::NoTrajectory);
        }
        if self.points.len() < 2 {
            return Err(Error::Parse("trajectory needs at least two points".into()));
        }
        let ext = grid.extent_m();
        for p in &self.points {
            if !(p[0].is_finite() && p[1].is_finite())
                || p[0] < 0.0
                || p[1] < 0.0
                || p[0] > ext
                || p[1] > ext
            {
                return Err(Error::Parse(format!("point {p:?} outside [0, {ext}]")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The discrete floor plan grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Dfpg {
    n: usize,
    cell_size_m: f64,
    cells: Vec<CellLabel>,
    h_segments: Vec<SegmentLabel>,
    v_segments: Vec<SegmentLabel>,
}

impl Dfpg {
    /// All-OUT grid with no boundary.
    pub fn empty(grid: GridSpec) -> Self {
        let n = grid.n;
        Self {
            n,
            cell_size_m: grid.cell_size_m,
            cells: vec![CellLabel::Out; n * n],
            h_segments: vec![SegmentLabel::None; (n + 1) * n],
            v_segments: vec![SegmentLabel::None; n * (n + 1)],
        }
    }

    /// Grid whose cells are IN where `interior` is set, with walls on every
    /// interior/exterior transition.
    pub fn from_interior(grid: GridSpec, interior: &[bool]) -> Self {
        let mut g = Self::empty(grid);
        for (cell, &inside) in g.cells.iter_mut().zip(interior) {
            *cell = if inside {
                CellLabel::In
            } else {
                CellLabel::Out
            };
        }
        g.relabel_walls();
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            cell_size_m: self.cell_size_m,
        }
    }

    pub fn cells(&self) -> &[CellLabel] {
        &self.cells
    }

    pub fn cell(&self, r: usize, c: usize) -> CellLabel {
        self.cells[r * self.n + c]
    }

    pub fn set_cell(&mut self, r: usize, c: usize, label: CellLabel) {
        self.cells[r * self.n + c] = label;
    }

    pub fn h_segments(&self) -> &[SegmentLabel] {
        &self.h_segments
    }

    pub fn v_segments(&self) -> &[SegmentLabel] {
        &self.v_segments
    }

    pub fn segment(&self, id: SegmentId) -> SegmentLabel {
        match id {
            SegmentId::H { row, col } => self.h_segments[row * self.n + col],
            SegmentId::V { row, col } => self.v_segments[row * (self.n + 1) + col],
        }
    }

    pub fn set_segment(&mut self, id: SegmentId, label: SegmentLabel) {
        match id {
            SegmentId::H { row, col } => self.h_segments[row * self.n + col] = label,
            SegmentId::V { row, col } => self.v_segments[row * (self.n + 1) + col] = label,
        }
    }

    pub fn all_segments(&self) -> impl Iterator<Item = SegmentId> + '_ {
        let n = self.n;
        let h = (0..=n).flat_map(move |row| (0..n).map(move |col| SegmentId::H { row, col }));
        let v = (0..n).flat_map(move |row| (0..=n).map(move |col| SegmentId::V { row, col }));
        h.chain(v)
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.is_interior()).collect()
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&c| c == CellLabel::In).collect()
    }

    pub fn furniture_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&c| c == CellLabel::Furn).collect()
    }

    /// Sets every transition segment to WALL (doors are dropped) and every
    /// other segment to NONE.
    pub fn relabel_walls(&mut self) {
        let interior = CellMap::from_mask(self.n, &self.interior_mask());
        self.h_segments.fill(SegmentLabel::None);
        self.v_segments.fill(SegmentLabel::None);
        for id in boundary_segments(&interior) {
            self.set_segment(id, SegmentLabel::Wall);
        }
    }

    /// Maximal runs of DOOR segments along straight lines, each sorted.
    pub fn door_runs(&self) -> Vec<Vec<SegmentId>> {
        let n = self.n;
        let mut runs = Vec::new();
        for row in 0..=n {
            let mut cur = Vec::new();
            for col in 0..=n {
                let id = SegmentId::H { row, col };
                if col < n && self.segment(id) == SegmentLabel::Door {
                    cur.push(id);
                } else if !cur.is_empty() {
                    runs.push(std::mem::take(&mut cur));
                }
            }
        }
        for col in 0..=n {
            let mut cur = Vec::new();
            for row in 0..=n {
                let id = SegmentId::V { row, col };
                if row < n && self.segment(id) == SegmentLabel::Door {
                    cur.push(id);
                } else if !cur.is_empty() {
                    runs.push(std::mem::take(&mut cur));
                }
            }
        }
        runs
    }

    /// Local consistency: a segment is WALL/DOOR exactly where it separates
    /// an interior cell from an exterior cell or the border.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.cells.len() != n * n
            || self.h_segments.len() != (n + 1) * n
            || self.v_segments.len() != n * (n + 1)
        {
            return Err(Error::InvalidDfpg("array shapes".into()));
        }
        let interior = CellMap::from_mask(n, &self.interior_mask());
        let transitions: BTreeSet<SegmentId> = boundary_segments(&interior).into_iter().collect();
        for id in self.all_segments() {
            let labeled = self.segment(id).is_boundary();
            if labeled != transitions.contains(&id) {
                return Err(Error::InvalidDfpg(format!(
                    "segment {id} is {:?} but {} a transition",
                    self.segment(id),
                    if labeled { "is not" } else { "is" }
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DfpgJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DfpgJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct DfpgJson {
    n: usize,
    cell_size_m: f64,
    cells: Vec<String>,
    h_segments: Vec<String>,
    v_segments: Vec<String>,
}

impl From<&Dfpg> for DfpgJson {
    fn from(g: &Dfpg) -> Self {
        let rows = |labels: &[SegmentLabel], width: usize| -> Vec<String> {
            labels
                .chunks(width)
                .map(|r| r.iter().map(|l| l.code()).collect())
                .collect()
        };
        Self {
            n: g.n,
            cell_size_m: g.cell_size_m,
            cells: g
                .cells
                .chunks(g.n)
                .map(|r| r.iter().map(|l| l.code()).collect())
                .collect(),
            h_segments: rows(&g.h_segments, g.n),
            v_segments: rows(&g.v_segments, g.n + 1),
        }
    }
}

fn parse_rows<T>(
    rows: &[String],
    count: usize,
    width: usize,
    what: &str,
    f: fn(char) -> Option<T>,
) -> Result<Vec<T>> {
    if rows.len() != count {
        return Err(Error::Parse(format!(
            "{what}: expected {count} rows, got {}",
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(count * width);
    for row in rows {
        let before = out.len();
        for ch in row.chars() {
            out.push(f(ch).ok_or_else(|| Error::Parse(format!("{what}: bad label `{ch}`")))?);
        }
        if out.len() - before != width {
            return Err(Error::Parse(format!(
                "{what}: row of width {} instead of {width}",
                out.len() - before
            )));
        }
    }
    Ok(out)
}

impl TryFrom<DfpgJson> for Dfpg {
    type Error = Error;

    fn try_from(raw: DfpgJson) -> Result<Self> {
        let grid = GridSpec::new(raw.n, raw.cell_size_m)?;
        let n = grid.n;
        Ok(Self {
            n,
            cell_size_m: grid.cell_size_m,
            cells: parse_rows(&raw.cells, n, n, "cells", CellLabel::from_code)?,
            h_segments: parse_rows(
                &raw.h_segments,
                n + 1,
                n,
                "h_segments",
                SegmentLabel::from_code,
            )?,
            v_segments: parse_rows(
                &raw.v_segments,
                n,
                n + 1,
                "v_segments",
                SegmentLabel::from_code,
            )?,
        })
    }
}

/// ℐ^in: 1 on IN and FURN cells.
pub fn derive_interior_map(g: &Dfpg) -> CellMap {
    CellMap::from_mask(g.n, &g.interior_mask())
}

/// ℐ^free: 1 on IN cells only.
pub fn derive_free_map(g: &Dfpg) -> CellMap {
    CellMap::from_mask(g.n, &g.free_mask())
}

/// Distance from `p` to segment `a-b`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

/// Distance from each cell center to the trajectory polyline, in meters.
/// Cells farther than `limit_m` keep `f64::INFINITY`.
pub fn trajectory_distance(grid: GridSpec, traj: &Trajectory, limit_m: f64) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::NoTrajectory);
    }
    let n = grid.n;
    let s = grid.cell_size_m;
    let mut dist = vec![f64::INFINITY; n * n];
    let pts = &traj.points;
    let pairs: Vec<([f64; 2], [f64; 2])> = if pts.len() == 1 {
        vec![(pts[0], pts[0])]
    } else {
        pts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    // Cell index range whose centers may lie within `limit_m` of [lo, hi].
    let span = |lo: f64, hi: f64| {
        let first = ((lo - limit_m) / s - 1.5).ceil().max(0.0);
        let last = ((hi + limit_m) / s + 0.5).floor().min(n as f64 - 1.0);
        (first as usize, last)
    };
    for (a, b) in pairs {
        let (c0, c1) = span(a[0].min(b[0]), a[0].max(b[0]));
        let (r0, r1) = span(a[1].min(b[1]), a[1].max(b[1]));
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        for r in r0..=r1 as usize {
            for c in c0..=c1 as usize {
                let d = point_segment_distance(grid.cell_center(r, c), a, b);
                if d <= limit_m && d < dist[r * n + c] {
                    dist[r * n + c] = d;
                }
            }
        }
    }
    Ok(dist)
}

/// ℐ^walk: `max(0, 1 - d / cutoff)` with `d` the center-to-polyline distance.
pub fn inverse_distance_map(grid: GridSpec, traj: &Trajectory, cutoff_m: f64) -> Result<CellMap> {
    if cutoff_m.is_nan() || cutoff_m <= 0.0 {
        return Err(Error::Config(format!("cutoff {cutoff_m}")));
    }
    let dist = trajectory_distance(grid, traj, cutoff_m)?;
    let data = dist
        .iter()
        .map(|&d| (1.0 - d / cutoff_m).max(0.0))
        .collect();
    CellMap::from_vec(grid.n, data)
}

/// Segments whose two incident cells differ in the binary `mask` (cells
/// beyond the grid count as 0), in H-then-V scan order.
pub fn boundary_segments(mask: &CellMap) -> Vec<SegmentId> {
    let n = mask.n();
    let at = |cell: Option<(usize, usize)>| cell.is_some_and(|(r, c)| mask.get(r, c) > 0.5);
    let mut out = Vec::new();
    for row in 0..=n {
        for col in 0..n {
            let id = SegmentId::H { row, col };
            let [a, b] = id.incident_cells(n);
            if at(a) != at(b) {
                out.push(id);
            }
        }
    }
    for row in 0..n {
        for col in 0..=n {
            let id = SegmentId::V { row, col };
            let [a, b] = id.incident_cells(n);
            if at(a) != at(b) {
                out.push(id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 0.25).unwrap()
    }

    fn mask_of(n: usize, cells: &[(usize, usize)]) -> CellMap {
        let mut m = CellMap::zeros(n);
        for &(r, c) in cells {
            m.set(r, c, 1.0);
        }
        m
    }

    #[test]
    fn maps_substitute_labels() {
        let mut g = Dfpg::empty(grid(4));
        assert_eq!(derive_interior_map(&g).sum(), 0.0);
        g.set_cell(1, 1, CellLabel::In);
        g.set_cell(1, 2, CellLabel::Furn);
        let inside = derive_interior_map(&g);
        assert_eq!(inside.sum(), 2.0);
        assert!(inside.is_binary());
        let free = derive_free_map(&g);
        assert_eq!(free.get(1, 1), 1.0);
        assert_eq!(free.get(1, 2), 0.0);
        let full = Dfpg::from_interior(grid(3), &[true; 9]);
        assert_eq!(derive_free_map(&full).sum(), 9.0);
    }

    #[test]
    fn inverse_distance_linear_ramp() {
        let g = grid(8);
        // Horizontal line through the centers of row 2 (y = 0.625).
        let traj = Trajectory::new(vec![[0.0, 0.625], [2.0, 0.625]]);
        let m = inverse_distance_map(g, &traj, 0.5).unwrap();
        assert_eq!(m.get(2, 3), 1.0);
        assert_eq!(m.get(3, 3), 0.5); // 0.25 m away
        assert_eq!(m.get(4, 3), 0.0); // exactly 0.5 m away
        assert_eq!(m.get(0, 3), 0.0);
        assert!(matches!(
            inverse_distance_map(g, &Trajectory::new(vec![]), 0.5),
            Err(Error::NoTrajectory)
        ));
    }

    #[test]
    fn boundary_of_small_shapes() {
        assert_eq!(boundary_segments(&mask_of(3, &[(1, 1)])).len(), 4);
        assert_eq!(
            boundary_segments(&mask_of(4, &[(1, 1), (1, 2), (2, 1), (2, 2)])).len(),
            8
        );
        // L-shape: (0,0), (1,0), (1,1). Transitions enumerated by hand:
        // top of (0,0); right of (0,0); top of (1,1); right of (1,1);
        // bottom of (1,0) and (1,1); left of (0,0) and (1,0).
        let l = boundary_segments(&mask_of(3, &[(0, 0), (1, 0), (1, 1)]));
        let expected: BTreeSet<SegmentId> = [
            SegmentId::H { row: 0, col: 0 },
            SegmentId::V { row: 0, col: 1 },
            SegmentId::H { row: 1, col: 1 },
            SegmentId::V { row: 1, col: 2 },
            SegmentId::H { row: 2, col: 0 },
            SegmentId::H { row: 2, col: 1 },
            SegmentId::V { row: 0, col: 0 },
            SegmentId::V { row: 1, col: 0 },
        ]
        .into_iter()
        .collect();
        assert_eq!(l.into_iter().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn json_round_trip_and_rejects_bad_labels() {
        let mut g = Dfpg::from_interior(grid(4), &[false, true, true, false].repeat(4));
        g.set_cell(2, 1, CellLabel::Furn);
        g.set_segment(SegmentId::H { row: 0, col: 1 }, SegmentLabel::Door);
        let text = g.to_json().unwrap();
        let back = Dfpg::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(text.contains("\"cells\":[\"OIIO\""));
        assert!(Dfpg::from_json(&text.replace("OIIO", "OXIO")).is_err());
        assert!(Dfpg::from_json(&text.replace("OIIO", "OII")).is_err());
        g.validate().unwrap();
    }

    #[test]
    fn validate_flags_a_wall_off_the_boundary() {
        let mut g = Dfpg::from_interior(grid(3), &[true; 9]);
        g.validate().unwrap();
        g.set_segment(SegmentId::V { row: 1, col: 1 }, SegmentLabel::Wall);
        assert!(g.validate().is_err());
    }

    #[test]
    fn door_runs_are_maximal() {
        let mut g = Dfpg::from_interior(grid(8), &[true; 64]);
        for col in 1..5 {
            g.set_segment(SegmentId::H { row: 0, col }, SegmentLabel::Door);
        }
        g.set_segment(SegmentId::V { row: 7, col: 8 }, SegmentLabel::Door);
        let runs = g.door_runs();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].len(), 4);
        assert_eq!(runs[1], vec![SegmentId::V { row: 7, col: 8 }]);
    }

    fn arb_mask() -> impl Strategy<Value = CellMap> {
        (1usize..7).prop_flat_map(|n| {
            prop::collection::vec(any::<bool>(), n * n).prop_map(move |b| CellMap::from_mask(n, &b))
        })
    }

    proptest! {
        #[test]
        fn interior_dominates_free(codes in prop::collection::vec(0u8..3, 25)) {
            let mut g = Dfpg::empty(grid(5));
            for (i, code) in codes.iter().enumerate() {
                let l = [CellLabel::Out, CellLabel::In, CellLabel::Furn][*code as usize];
                g.set_cell(i / 5, i % 5, l);
            }
            let a = derive_interior_map(&g);
            let b = derive_free_map(&g);
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x >= y));
        }

        #[test]
        fn boundary_symmetric_under_complement(m in arb_mask()) {
            // Complement relative to a grid framed by one OUT ring, so the
            // border is treated the same way on both sides.
            let n = m.n();
            let framed = CellMap::from_fn(n + 2, |r, c| {
                if r == 0 || c == 0 || r == n + 1 || c == n + 1 { 0.0 } else { m.get(r - 1, c - 1) }
            });
            let comp = CellMap::from_fn(n + 2, |r, c| 1.0 - framed.get(r, c));
            let a: BTreeSet<_> = boundary_segments(&framed).into_iter().collect();
            let b: BTreeSet<_> = boundary_segments(&comp)
                .into_iter()
                .filter(|id| match *id {
                    SegmentId::H { row, .. } => row > 0 && row < n + 2,
                    SegmentId::V { col, .. } => col > 0 && col < n + 2,
                })
                .collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn boundary_equals_wall_set(m in arb_mask()) {
            let g = Dfpg::from_interior(grid(m.n()), &m.to_mask());
            let walls: BTreeSet<_> = g.all_segments().filter(|&id| g.segment(id).is_boundary()).collect();
            let b: BTreeSet<_> = boundary_segments(&m).into_iter().collect();
            prop_assert_eq!(walls, b);
        }

        #[test]
        fn inverse_distance_monotone(
            pts in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..6),
            r in 0usize..8, c in 0usize..8,
        ) {
            // A cell closer to the polyline never scores lower.
            let g = grid(8);
            let traj = Trajectory::new(pts.iter().map(|&(x, y)| [x, y]).collect());
            let m = inverse_distance_map(g, &traj, 0.5).unwrap();
            let d = trajectory_distance(g, &traj, f64::INFINITY).unwrap();
            for r2 in 0..8 {
                for c2 in 0..8 {
                    if d[r2 * 8 + c2] <= d[r * 8 + c] {
                        prop_assert!(m.get(r2, c2) >= m.get(r, c));
                    }
                }
            }
            for v in m.data() {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn trajectory_distance_matches_brute_force(
            pts in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..6),
        ) {
            let g = grid(8);
            let traj = Trajectory::new(pts.iter().map(|&(x, y)| [x, y]).collect());
            let fast = trajectory_distance(g, &traj, 0.5).unwrap();
            for r in 0..8 {
                for c in 0..8 {
                    let p = g.cell_center(r, c);
                    let brute = if traj.len() == 1 {
                        point_segment_distance(p, traj.points[0], traj.points[0])
                    } else {
                        traj.points.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
                    };
                    let expect = if brute <= 0.5 { brute } else { f64::INFINITY };
                    prop_assert_eq!(fast[r * 8 + c], expect);
                }
            }
        }
    }
}
