//! The clockwise wall loop of an interior mask and the door-detection graph
//! built on it.
//!
//! Loops run clockwise on screen (row 0 at the top) with the interior on
//! the right of every directed segment, starting at the top-left
//! horizontal segment.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dfpg::{boundary_segments, CellMap, Dfpg, SegmentId, SegmentLabel};
use crate::error::{Error, Result};

/// Cells sampled inward from each segment.
pub const RAY_CELLS: usize = 10;
/// Node feature length: corner distance, orientation, inward ray, midpoint.
pub const NODE_FEATURES: usize = 2 + RAY_CELLS + 2;
pub const EDGE_FEATURES: usize = 2;

/// A boundary segment with its travel direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedSegment {
    pub id: SegmentId,
    /// Start lattice point `(x, y)` in cell units.
    pub from: [usize; 2],
    pub to: [usize; 2],
}

impl DirectedSegment {
    /// Unit direction `(dx, dy)`.
    pub fn direction(&self) -> [i64; 2] {
        [
            self.to[0] as i64 - self.from[0] as i64,
            self.to[1] as i64 - self.from[1] as i64,
        ]
    }

    /// Unit normal pointing into the interior (right-hand side on screen).
    pub fn inward(&self) -> [i64; 2] {
        let [dx, dy] = self.direction();
        [-dy, dx]
    }

    /// The interior cell `(row, col)` on the right-hand side.
    pub fn interior_cell(&self) -> (usize, usize) {
        let [dx, dy] = self.direction();
        let x = self.from[0].min(self.to[0]);
        let y = self.from[1].min(self.to[1]);
        match (dx, dy) {
            (1, 0) => (y, x),
            (-1, 0) => (y - 1, x),
            (0, 1) => (y, x - 1),
            _ => (y, x),
        }
    }
}

/// Closed clockwise loop of boundary segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    n: usize,
    segments: Vec<DirectedSegment>,
    interior: Vec<bool>,
}

fn directed(id: SegmentId, interior_right_or_below: bool) -> DirectedSegment {
    let (a, b) = id.endpoints();
    // H: interior below -> eastward; V: interior left -> southward.
    let forward = match id {
        SegmentId::H { .. } => interior_right_or_below,
        SegmentId::V { .. } => !interior_right_or_below,
    };
    if forward {
        DirectedSegment { id, from: a, to: b }
    } else {
        DirectedSegment { id, from: b, to: a }
    }
}

/// Orders the transition segments of `interior` into one clockwise loop.
pub fn extract_boundary_loop(interior: &CellMap) -> Result<BoundaryLoop> {
    let n = interior.n();
    let mask = interior.to_mask();
    let ids = boundary_segments(interior);
    if ids.is_empty() {
        return Err(Error::NonSimpleBoundary("empty interior".into()));
    }
    let inside = |cell: Option<(usize, usize)>| cell.is_some_and(|(r, c)| mask[r * n + c]);
    let segs: Vec<DirectedSegment> = ids
        .iter()
        .map(|&id| {
            let [_, second] = id.incident_cells(n);
            directed(id, inside(second))
        })
        .collect();
    let mut outgoing: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        outgoing.entry(s.from).or_default().push(i);
    }
    if let Some((v, out)) = outgoing.iter().find(|(_, out)| out.len() != 1) {
        return Err(Error::NonSimpleBoundary(format!(
            "vertex {v:?} has {} outgoing segments",
            out.len()
        )));
    }
    // H segments come first in scan order; the first eastward one is top-left.
    let start = segs
        .iter()
        .position(|s| s.id.is_horizontal() && s.to[0] > s.from[0])
        .ok_or_else(|| Error::NonSimpleBoundary("no top wall".into()))?;
    let mut order = vec![start];
    let mut cur = start;
    loop {
        let next = outgoing
            .get(&segs[cur].to)
            .map(|o| o[0])
            .ok_or_else(|| Error::NonSimpleBoundary(format!("open chain at {:?}", segs[cur].to)))?;
        if next == start {
            break;
        }
        if order.len() > segs.len() {
            return Err(Error::NonSimpleBoundary("loop does not close".into()));
        }
        order.push(next);
        cur = next;
    }
    if order.len() != segs.len() {
        return Err(Error::NonSimpleBoundary(format!(
            "{} of {} boundary segments on the outer loop",
            order.len(),
            segs.len()
        )));
    }
    Ok(BoundaryLoop {
        n,
        segments: order.into_iter().map(|i| segs[i]).collect(),
        interior: mask,
    })
}

impl BoundaryLoop {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[DirectedSegment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &DirectedSegment {
        &self.segments[i]
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    pub fn prev(&self, i: usize) -> usize {
        (i + self.len() - 1) % self.len()
    }

    pub fn next(&self, i: usize) -> usize {
        (i + 1) % self.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = SegmentId> + '_ {
        self.segments.iter().map(|s| s.id)
    }

    pub fn index_of(&self) -> HashMap<SegmentId, usize> {
        self.ids().enumerate().map(|(i, id)| (id, i)).collect()
    }

    /// Loop positions `i` where segment `i` turns relative to segment `i - 1`.
    pub fn corners(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                self.segments[i].id.is_horizontal()
                    != self.segments[self.prev(i)].id.is_horizontal()
            })
            .collect()
    }

    /// Shoelace area over the loop vertices with `y` pointing up; negative
    /// for the clockwise convention.
    pub fn signed_area(&self) -> f64 {
        let mut twice = 0i64;
        for s in &self.segments {
            let (x0, y0) = (s.from[0] as i64, -(s.from[1] as i64));
            let (x1, y1) = (s.to[0] as i64, -(s.to[1] as i64));
            twice += x0 * y1 - x1 * y0;
        }
        twice as f64 / 2.0
    }

    /// Maximal straight runs as `(start position, length)`, in loop order
    /// starting from the first corner.
    pub fn straight_runs(&self) -> Vec<(usize, usize)> {
        let corners = self.corners();
        corners
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let end = corners[(k + 1) % corners.len()];
                let len = (end + self.len() - c) % self.len();
                (c, if len == 0 { self.len() } else { len })
            })
            .collect()
    }

    /// Per-position id of the straight run containing it.
    pub fn run_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.len()];
        for (k, (start, len)) in self.straight_runs().into_iter().enumerate() {
            for j in 0..len {
                ids[(start + j) % self.len()] = k;
            }
        }
        ids
    }

    /// Segment counts to the nearest segment touching a corner, taking the
    /// shorter way around the loop.
    pub fn corner_distances(&self) -> Vec<usize> {
        let len = self.len();
        let h = |i: usize| self.segments[i % len].id.is_horizontal();
        let mut fwd = vec![usize::MAX; len];
        let mut bwd = vec![usize::MAX; len];
        // Two passes settle the wrap-around.
        for _ in 0..2 {
            for i in (0..len).rev() {
                fwd[i] = if h(i) != h(i + 1) {
                    0
                } else {
                    fwd[(i + 1) % len].saturating_add(1)
                };
            }
            for i in 0..len {
                let p = self.prev(i);
                bwd[i] = if h(i) != h(p) {
                    0
                } else {
                    bwd[p].saturating_add(1)
                };
            }
        }
        fwd.iter().zip(&bwd).map(|(&a, &b)| a.min(b)).collect()
    }

    /// Interior cells stepped inward from segment `i`, stopping at the first
    /// cell outside the interior (at most `max` cells).
    pub fn inward_cells(&self, i: usize, max: usize) -> Vec<(usize, usize)> {
        let s = &self.segments[i];
        let [dx, dy] = s.inward();
        let (mut r, mut c) = s.interior_cell();
        let mut out = Vec::new();
        let n = self.n as i64;
        while out.len() < max {
            out.push((r, c));
            let (r2, c2) = (r as i64 + dy, c as i64 + dx);
            if r2 < 0 || c2 < 0 || r2 >= n || c2 >= n || !self.interior[(r2 * n + c2) as usize] {
                break;
            }
            (r, c) = (r2 as usize, c2 as usize);
        }
        out
    }

    /// Loop node hit first by the inward perpendicular ray from segment `i`.
    pub fn opposite_segment(&self, i: usize) -> usize {
        self.opposite_with(i, &self.index_of())
    }

    fn opposite_with(&self, i: usize, index: &HashMap<SegmentId, usize>) -> usize {
        let s = &self.segments[i];
        let cells = self.inward_cells(i, usize::MAX);
        let &(r, c) = cells.last().expect("at least the starting cell");
        let exit = match s.inward() {
            [0, 1] => SegmentId::H { row: r + 1, col: c },
            [0, -1] => SegmentId::H { row: r, col: c },
            [1, 0] => SegmentId::V { row: r, col: c + 1 },
            _ => SegmentId::V { row: r, col: c },
        };
        index[&exit]
    }

    /// Per-node labels read from a grid's segments.
    pub fn labels_from(&self, g: &Dfpg) -> Vec<SegmentLabel> {
        self.ids().map(|id| g.segment(id)).collect()
    }
}

/// Raw attributes of one loop node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub segment: SegmentId,
    /// Segments to the closest corner (0 when touching one).
    pub corner_distance: usize,
    pub vertical: bool,
    /// ℐ^walk along the inward ray, zero-padded past the opposite wall.
    pub inward: [f64; RAY_CELLS],
    /// Segment midpoint `(x, y)` in cells.
    pub midpoint: [f64; 2],
}

/// Directed message edge `source -> target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub target: usize,
    pub source: usize,
    /// Orientation dissimilarity `1 - |u_t . u_s|`.
    pub dissimilarity: f64,
    /// `|m_t - m_s|_1` in cells.
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGraph {
    pub n: usize,
    pub nodes: Vec<NodeInfo>,
    /// Three incoming edges per node: previous, next, opposite.
    pub edges: Vec<GraphEdge>,
}

pub fn build_boundary_graph(lp: &BoundaryLoop, walk_map: &CellMap) -> Result<BoundaryGraph> {
    if walk_map.n() != lp.n() {
        return Err(Error::Shape(format!(
            "walk map {} vs loop grid {}",
            walk_map.n(),
            lp.n()
        )));
    }
    let index = lp.index_of();
    let dist = lp.corner_distances();
    let nodes: Vec<NodeInfo> = (0..lp.len())
        .map(|i| {
            let s = lp.segment(i);
            let mut inward = [0.0; RAY_CELLS];
            for (k, (r, c)) in lp.inward_cells(i, RAY_CELLS).into_iter().enumerate() {
                inward[k] = walk_map.get(r, c);
            }
            NodeInfo {
                segment: s.id,
                corner_distance: dist[i],
                vertical: !s.id.is_horizontal(),
                inward,
                midpoint: s.id.midpoint(),
            }
        })
        .collect();
    let mut edges = Vec::with_capacity(3 * lp.len());
    for i in 0..lp.len() {
        for j in [lp.prev(i), lp.next(i), lp.opposite_with(i, &index)] {
            let (a, b) = (&nodes[i], &nodes[j]);
            let dissimilarity = if a.vertical == b.vertical { 0.0 } else { 1.0 };
            let l1 = (a.midpoint[0] - b.midpoint[0]).abs() + (a.midpoint[1] - b.midpoint[1]).abs();
            edges.push(GraphEdge {
                target: i,
                source: j,
                dissimilarity,
                l1,
            });
        }
    }
    Ok(BoundaryGraph {
        n: lp.n(),
        nodes,
        edges,
    })
}

impl BoundaryGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Normalized `N x 14` node features: corner distance / n_B,
    /// orientation, inward ray, midpoint / n.
    pub fn node_feature_matrix(&self) -> Vec<f64> {
        let nb = self.nodes.len() as f64;
        let n = self.n as f64;
        let mut out = Vec::with_capacity(self.nodes.len() * NODE_FEATURES);
        for v in &self.nodes {
            out.push(v.corner_distance as f64 / nb);
            out.push(if v.vertical { 1.0 } else { 0.0 });
            out.extend_from_slice(&v.inward);
            out.push(v.midpoint[0] / n);
            out.push(v.midpoint[1] / n);
        }
        out
    }

    /// Deduplicated edge feature rows `[dissimilarity, l1 / n]` and the row
    /// index of every edge.
    pub fn edge_feature_table(&self) -> (Vec<[f64; EDGE_FEATURES]>, Vec<usize>) {
        let n = self.n as f64;
        let mut rows = Vec::new();
        let mut seen: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let mut idx = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let row = [e.dissimilarity, e.l1 / n];
            let key = (row[0].to_bits(), row[1].to_bits());
            let k = *seen.entry(key).or_insert_with(|| {
                rows.push(row);
                rows.len() - 1
            });
            idx.push(k);
        }
        (rows, idx)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Checks local label consistency and that the WALL/DOOR segments form one
/// closed loop; returns that loop.
pub fn check_single_room(g: &Dfpg) -> Result<BoundaryLoop> {
    g.validate()?;
    let lp = extract_boundary_loop(&CellMap::from_mask(g.n(), &g.interior_mask()))?;
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_of(n: usize, cells: &[(usize, usize)]) -> CellMap {
        let mut m = CellMap::zeros(n);
        for &(r, c) in cells {
            m.set(r, c, 1.0);
        }
        m
    }

    fn rect(n: usize, r0: usize, c0: usize, h: usize, w: usize) -> CellMap {
        CellMap::from_fn(n, |r, c| {
            f64::from(u8::from(r >= r0 && r < r0 + h && c >= c0 && c < c0 + w))
        })
    }

    fn assert_chained(lp: &BoundaryLoop) {
        for i in 0..lp.len() {
            assert_eq!(lp.segment(i).to, lp.segment(lp.next(i)).from);
        }
    }

    #[test]
    fn single_cell_loop_is_clockwise() {
        let lp = extract_boundary_loop(&mask_of(3, &[(1, 1)])).unwrap();
        let ids: Vec<_> = lp.ids().collect();
        assert_eq!(
            ids,
            vec![
                SegmentId::H { row: 1, col: 1 },
                SegmentId::V { row: 1, col: 2 },
                SegmentId::H { row: 2, col: 1 },
                SegmentId::V { row: 1, col: 1 },
            ]
        );
        assert_chained(&lp);
        assert_eq!(lp.signed_area(), -1.0);
        assert_eq!(lp.opposite_segment(0), 2);
        assert_eq!(lp.opposite_segment(1), 3);
    }

    #[test]
    fn block_and_l_shape_loops() {
        let lp = extract_boundary_loop(&rect(4, 1, 1, 2, 2)).unwrap();
        assert_eq!(lp.len(), 8);
        assert_chained(&lp);
        let l = extract_boundary_loop(&mask_of(3, &[(0, 0), (1, 0), (1, 1)])).unwrap();
        assert_eq!(l.len(), 8);
        assert_chained(&l);
        // Shoelace over the vertices listed by hand (y up): the L-shape
        // (0,0)->(1,0)->(1,-1)->(2,-1)->(2,-2)->(0,-2) has area -3.
        let hand = [(0, 0), (1, 0), (1, -1), (2, -1), (2, -2), (0, -2)];
        let mut twice = 0;
        for k in 0..hand.len() {
            let (a, b) = (hand[k], hand[(k + 1) % hand.len()]);
            twice += a.0 * b.1 - b.0 * a.1;
        }
        assert_eq!(twice, -6);
        assert_eq!(l.signed_area(), twice as f64 / 2.0);
    }

    #[test]
    fn holes_and_pinches_are_rejected() {
        let ring = CellMap::from_fn(5, |r, c| {
            f64::from(u8::from(
                (1..4).contains(&r) && (1..4).contains(&c) && (r, c) != (2, 2),
            ))
        });
        assert!(matches!(
            extract_boundary_loop(&ring),
            Err(Error::NonSimpleBoundary(_))
        ));
        let diag = mask_of(3, &[(0, 0), (1, 1)]);
        assert!(matches!(
            extract_boundary_loop(&diag),
            Err(Error::NonSimpleBoundary(_))
        ));
        let two = mask_of(4, &[(0, 0), (3, 3)]);
        assert!(matches!(
            extract_boundary_loop(&two),
            Err(Error::NonSimpleBoundary(_))
        ));
        assert!(extract_boundary_loop(&CellMap::zeros(3)).is_err());
    }

    #[test]
    fn square_room_top_wall_faces_bottom_wall() {
        let lp = extract_boundary_loop(&rect(6, 1, 1, 4, 4)).unwrap();
        for i in 0..lp.len() {
            if let SegmentId::H { row: 1, col } = lp.segment(i).id {
                let j = lp.opposite_segment(i);
                assert_eq!(lp.segment(j).id, SegmentId::H { row: 5, col });
            }
        }
    }

    /// Ray/segment intersection oracle: nearest loop segment crossed by the
    /// inward ray from the midpoint of segment `i`.
    fn ray_oracle(lp: &BoundaryLoop, i: usize) -> usize {
        let s = lp.segment(i);
        let m = s.id.midpoint();
        let [dx, dy] = s.inward();
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, t) in lp.segments().iter().enumerate() {
            if j == i || t.id.is_horizontal() != s.id.is_horizontal() {
                continue;
            }
            let (a, b) = t.id.endpoints();
            let dist = if s.id.is_horizontal() {
                let within = (a[0] as f64) < m[0] && m[0] < b[0] as f64;
                (within, (a[1] as f64 - m[1]) * dy as f64)
            } else {
                let within = (a[1] as f64) < m[1] && m[1] < b[1] as f64;
                (within, (a[0] as f64 - m[0]) * dx as f64)
            };
            if dist.0 && dist.1 > 0.0 && dist.1 < best.0 {
                best = (dist.1, j);
            }
        }
        best.1
    }

    #[test]
    fn l_room_opposites_match_ray_oracle() {
        let n = 8;
        let l = CellMap::from_fn(n, |r, c| {
            f64::from(u8::from(
                (1..7).contains(&r) && (1..7).contains(&c) && !(r < 4 && c >= 4),
            ))
        });
        let lp = extract_boundary_loop(&l).unwrap();
        for i in 0..lp.len() {
            assert_eq!(lp.opposite_segment(i), ray_oracle(&lp, i), "node {i}");
        }
        // The notch floor (row 4, top-right cut-out) looks down to the bottom wall.
        let idx = lp.index_of();
        let notch_floor = idx[&SegmentId::H { row: 4, col: 5 }];
        assert_eq!(
            lp.segment(lp.opposite_segment(notch_floor)).id,
            SegmentId::H { row: 7, col: 5 }
        );
    }

    #[test]
    fn corner_distances_and_graph_edges() {
        let lp = extract_boundary_loop(&rect(8, 1, 1, 2, 6)).unwrap();
        // Top wall: six segments, distances 0 1 2 2 1 0.
        let d = lp.corner_distances();
        assert_eq!(&d[..6], &[0, 1, 2, 2, 1, 0]);
        let walk = CellMap::from_fn(8, |r, c| (r * 8 + c) as f64 / 64.0);
        let g = build_boundary_graph(&lp, &walk).unwrap();
        assert_eq!(g.edges.len(), 3 * lp.len());
        // Node 1: collinear neighbours, opposite below.
        let e: Vec<_> = g.edges.iter().filter(|e| e.target == 1).collect();
        assert_eq!(e[0].dissimilarity, 0.0);
        assert_eq!(e[0].l1, 1.0);
        assert_eq!(e[2].dissimilarity, 0.0);
        assert_eq!(e[2].l1, 2.0);
        // Node 5 (last of top wall) turns into the right wall.
        let e: Vec<_> = g.edges.iter().filter(|e| e.target == 5).collect();
        assert_eq!(e[1].dissimilarity, 1.0);
        assert_eq!(e[1].l1, 1.0);
        // Inward ray of node 0: cells (1,1), (2,1), then zero padding.
        assert_eq!(g.nodes[0].inward[0], walk.get(1, 1));
        assert_eq!(g.nodes[0].inward[1], walk.get(2, 1));
        assert!(g.nodes[0].inward[2..].iter().all(|&v| v == 0.0));
        let feats = g.node_feature_matrix();
        assert_eq!(feats.len(), lp.len() * NODE_FEATURES);
        let (rows, idx) = g.edge_feature_table();
        assert_eq!(idx.len(), g.edges.len());
        assert!(rows.len() < g.edges.len());
    }

    #[test]
    fn l1_feature_arithmetic() {
        let a = SegmentId::H { row: 0, col: 1 }.midpoint();
        let b = SegmentId::H { row: 0, col: 4 }.midpoint();
        assert_eq!(a, [1.5, 0.0]);
        assert_eq!((a[0] - b[0]).abs() + (a[1] - b[1]).abs(), 3.0);
    }

    /// Random simply connected masks: union of overlapping rectangles
    /// attached to a seed rectangle, holes filled, largest component kept,
    /// diagonal pinches removed by dropping one cell.
    pub(crate) fn arb_room() -> impl Strategy<Value = CellMap> {
        prop::collection::vec((0usize..8, 0usize..8, 1usize..6, 1usize..6), 1..5).prop_filter_map(
            "not simple",
            |rects| {
                let n = 10;
                let mut mask = vec![false; n * n];
                for (r, c, h, w) in rects {
                    for rr in r..(r + h).min(n) {
                        for cc in c..(c + w).min(n) {
                            mask[rr * n + cc] = true;
                        }
                    }
                }
                let mask =
                    crate::raster::fill_holes(&crate::raster::largest_component(&mask, n), n);
                let m = CellMap::from_mask(n, &mask);
                extract_boundary_loop(&m).ok().map(|_| m)
            },
        )
    }

    fn rotate_cw(m: &CellMap) -> CellMap {
        let n = m.n();
        let mut out = CellMap::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(c, n - 1 - r, m.get(r, c));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn loop_invariants(m in arb_room()) {
            let lp = extract_boundary_loop(&m).unwrap();
            let mut sum = [0i64; 2];
            for i in 0..lp.len() {
                prop_assert_eq!(lp.segment(i).to, lp.segment(lp.next(i)).from);
                let d = lp.segment(i).direction();
                sum[0] += d[0];
                sum[1] += d[1];
                let (r, c) = lp.segment(i).interior_cell();
                prop_assert!(m.get(r, c) == 1.0);
                prop_assert_eq!(lp.opposite_segment(i), ray_oracle(&lp, i));
            }
            prop_assert_eq!(sum, [0, 0]);
            prop_assert!(lp.signed_area() < 0.0);
            prop_assert_eq!(-lp.signed_area(), m.sum());
            let g = build_boundary_graph(&lp, &m).unwrap();
            for i in 0..g.len() {
                prop_assert_eq!(g.edges.iter().filter(|e| e.target == i).count(), 3);
            }
            for e in &g.edges {
                prop_assert!(e.dissimilarity == 0.0 || e.dissimilarity == 1.0);
            }
        }

        #[test]
        fn graph_rotates_with_the_mask(m in arb_room()) {
            let n = m.n() as f64;
            let a = build_boundary_graph(&extract_boundary_loop(&m).unwrap(), &m).unwrap();
            let rm = rotate_cw(&m);
            let b = build_boundary_graph(&extract_boundary_loop(&rm).unwrap(), &rm).unwrap();
            prop_assert_eq!(a.len(), b.len());
            let pos: HashMap<(u64, u64), usize> = b
                .nodes
                .iter()
                .enumerate()
                .map(|(i, v)| ((v.midpoint[0].to_bits(), v.midpoint[1].to_bits()), i))
                .collect();
            let map: Vec<usize> = a
                .nodes
                .iter()
                .map(|v| {
                    let p = [n - v.midpoint[1], v.midpoint[0]];
                    pos[&(p[0].to_bits(), p[1].to_bits())]
                })
                .collect();
            for (i, v) in a.nodes.iter().enumerate() {
                let w = &b.nodes[map[i]];
                prop_assert_eq!(v.corner_distance, w.corner_distance);
                prop_assert_eq!(v.vertical, !w.vertical);
                prop_assert_eq!(v.inward, w.inward);
            }
            for e in &a.edges {
                let twin = b.edges.iter().find(|f| f.target == map[e.target] && f.source == map[e.source]);
                prop_assert!(twin.is_some_and(|f| f.l1 == e.l1 && f.dissimilarity == e.dissimilarity));
            }
        }
    }
}
