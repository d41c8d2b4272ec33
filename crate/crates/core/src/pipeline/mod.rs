//! The three-stage cascade and everything around it: the floor-plan result
//! type, dataset builds, training, baselines, SVG rendering and the
//! experiment driver.

pub mod baseline;
pub mod dataset;
pub mod experiment;
pub mod render;
pub mod repro;
pub mod training;

use std::fs;
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkplan_nn::encdec::argmax_channels;
use walkplan_nn::ops::{softmax, ClassLayout};
use walkplan_nn::{Array, Checkpoint, EccNet, EdgeRef, EncDec, GraphInput};

use crate::boundgraph::{build_boundary_graph, extract_boundary_loop, BoundaryGraph, BoundaryLoop};
use crate::dfpg::{
    inverse_distance_map, CellLabel, CellMap, Dfpg, GridSpec, SegmentId, SegmentLabel, Trajectory,
    DEFAULT_CUTOFF_M,
};
use crate::error::{Error, Result};
use crate::gen::DOOR_WIDTH;
use crate::raster;
use crate::regularize::{
    clean_isolated_cells, clean_isolated_door_nodes, door_runs_on_loop, mrf_smooth,
    normalize_door_width, repair_connectivity, MrfConfig,
};

pub use dataset::{build_dataset, Dataset, DatasetConfig, RoomSample};
pub use render::render_svg;

const FLOORPLAN_FORMAT: &str = "walkplan-floorplan";
const FLOORPLAN_VERSION: u32 = 1;

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Content hashes of the stage 1, 2 and 3 checkpoints.
    pub checkpoints: Vec<String>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

/// Inferred floor plan: footprint, door runs on its wall loop, furniture.
#[derive(Clone, Debug, PartialEq)]
pub struct FloorPlan {
    pub grid: GridSpec,
    pub interior: CellMap,
    /// Each door is a run of consecutive positions on the boundary loop of
    /// `interior`.
    pub doors: Vec<Vec<usize>>,
    pub furniture: CellMap,
    pub provenance: Provenance,
}

/// Run lengths of alternating values, starting with a (possibly empty) run of 0s.
pub fn rle_encode(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut cur = false;
    let mut len = 0;
    for &v in mask {
        if v == cur {
            len += 1;
        } else {
            runs.push(len);
            cur = v;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode(runs: &[usize], total: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(total);
    for (k, &len) in runs.iter().enumerate() {
        out.extend(std::iter::repeat_n(k % 2 == 1, len));
    }
    if out.len() != total {
        return Err(Error::Parse(format!(
            "run lengths cover {} cells, expected {total}",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FloorPlanJson {
    format: String,
    version: u32,
    grid: GridSpec,
    interior: Vec<usize>,
    doors: Vec<Vec<usize>>,
    furniture: Vec<usize>,
    provenance: Provenance,
}

impl FloorPlan {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn boundary_loop(&self) -> Result<BoundaryLoop> {
        extract_boundary_loop(&self.interior)
    }

    /// Door runs as segment ids.
    pub fn door_segments(&self) -> Result<Vec<Vec<SegmentId>>> {
        let lp = self.boundary_loop()?;
        Ok(self
            .doors
            .iter()
            .map(|d| d.iter().map(|&i| lp.segment(i).id).collect())
            .collect())
    }

    /// Checks the structural invariants: one simple wall loop, door runs of
    /// consecutive loop positions, furniture inside the footprint.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.interior.n() != n || self.furniture.n() != n {
            return Err(Error::Shape("plan masks do not match the grid".into()));
        }
        if !self.interior.is_binary() || !self.furniture.is_binary() {
            return Err(Error::InvalidDfpg("plan masks must be binary".into()));
        }
        let lp = self.boundary_loop()?;
        let len = lp.len();
        for d in &self.doors {
            let ok = !d.is_empty()
                && d.iter().all(|&i| i < len)
                && d.windows(2).all(|w| w[1] == (w[0] + 1) % len);
            if !ok {
                return Err(Error::InvalidDfpg(format!(
                    "door run {d:?} is not a run on the {len}-segment wall loop"
                )));
            }
        }
        let inside = self.interior.to_mask();
        if self
            .furniture
            .to_mask()
            .iter()
            .zip(&inside)
            .any(|(&f, &i)| f && !i)
        {
            return Err(Error::InvalidDfpg("furniture outside the footprint".into()));
        }
        Ok(())
    }

    /// The plan of a ground-truth room.
    pub fn from_dfpg(g: &Dfpg) -> Result<Self> {
        let lp = crate::boundgraph::check_single_room(g)?;
        Ok(FloorPlan {
            grid: g.grid(),
            interior: CellMap::from_mask(g.n(), &g.interior_mask()),
            doors: door_position_runs(&lp.labels_from(g)),
            furniture: CellMap::from_mask(g.n(), &g.furniture_mask()),
            provenance: Provenance::default(),
        })
    }

    pub fn to_dfpg(&self) -> Result<Dfpg> {
        let mut g = Dfpg::from_interior(self.grid, &self.interior.to_mask());
        let n = self.n();
        for (i, &f) in self.furniture.to_mask().iter().enumerate() {
            if f {
                g.set_cell(i / n, i % n, CellLabel::Furn);
            }
        }
        for run in self.door_segments()? {
            for id in run {
                g.set_segment(id, SegmentLabel::Door);
            }
        }
        Ok(g)
    }

    /// Shifts the plan by `(dx, dy)` cells. Loop positions are unchanged
    /// because the loop start moves with the shape.
    pub fn translated(&self, dx: i64, dy: i64) -> Result<FloorPlan> {
        let n = self.n();
        let shift = |m: &CellMap| -> Result<CellMap> {
            let mut out = CellMap::zeros(n);
            for r in 0..n {
                for c in 0..n {
                    if m.get(r, c) > 0.5 {
                        let (r2, c2) = (r as i64 + dy, c as i64 + dx);
                        if r2 < 0 || c2 < 0 || r2 >= n as i64 || c2 >= n as i64 {
                            return Err(Error::Shape(format!(
                                "translation by ({dx}, {dy}) leaves the grid"
                            )));
                        }
                        out.set(r2 as usize, c2 as usize, 1.0);
                    }
                }
            }
            Ok(out)
        };
        Ok(FloorPlan {
            grid: self.grid,
            interior: shift(&self.interior)?,
            doors: self.doors.clone(),
            furniture: shift(&self.furniture)?,
            provenance: self.provenance.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let j = FloorPlanJson {
            format: FLOORPLAN_FORMAT.into(),
            version: FLOORPLAN_VERSION,
            grid: self.grid,
            interior: rle_encode(&self.interior.to_mask()),
            doors: self.doors.clone(),
            furniture: rle_encode(&self.furniture.to_mask()),
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: FloorPlanJson = serde_json::from_str(text)?;
        if j.format != FLOORPLAN_FORMAT || j.version != FLOORPLAN_VERSION {
            return Err(Error::Parse(format!(
                "unsupported floor plan {} v{}",
                j.format, j.version
            )));
        }
        let grid = GridSpec::new(j.grid.n, j.grid.cell_size_m)?;
        let n = grid.n;
        let plan = FloorPlan {
            grid,
            interior: CellMap::from_mask(n, &rle_decode(&j.interior, n * n)?),
            doors: j.doors,
            furniture: CellMap::from_mask(n, &rle_decode(&j.furniture, n * n)?),
            provenance: j.provenance,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Post-processing settings applied between the stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub mrf: MrfConfig,
    pub door_width: usize,
    pub cutoff_m: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            mrf: MrfConfig::default(),
            door_width: DOOR_WIDTH,
            cutoff_m: DEFAULT_CUTOFF_M,
        }
    }
}

impl CascadeConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("plain data").as_bytes())
    }
}

/// The three trained stage networks.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub interior: EncDec,
    pub doors: EccNet,
    pub furniture: EncDec,
}

const MODEL_FILES: [&str; 3] = [
    "interior.ckpt.json",
    "doors.ckpt.json",
    "furniture.ckpt.json",
];

impl Models {
    pub fn checkpoints(&self) -> Result<[Checkpoint; 3]> {
        Ok([
            self.interior.to_checkpoint()?,
            self.doors.to_checkpoint()?,
            self.furniture.to_checkpoint()?,
        ])
    }

    /// Content hashes of the three checkpoints (first 16 hex digits).
    pub fn checkpoint_ids(&self) -> Result<Vec<String>> {
        self.checkpoints()?
            .iter()
            .map(|c| Ok(sha256_hex(c.to_json()?.as_bytes())[..16].to_string()))
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        fs::create_dir_all(dir.as_ref())?;
        for (c, name) in self.checkpoints()?.iter().zip(MODEL_FILES) {
            c.save(dir.as_ref().join(name))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let load = |name: &str| Checkpoint::load(dir.as_ref().join(name));
        Ok(Self {
            interior: EncDec::from_checkpoint(&load(MODEL_FILES[0])?)?,
            doors: EccNet::from_checkpoint(&load(MODEL_FILES[1])?)?,
            furniture: EncDec::from_checkpoint(&load(MODEL_FILES[2])?)?,
        })
    }
}

fn stack(planes: &[&CellMap]) -> Array {
    let n = planes[0].n();
    let data: Vec<f64> = planes
        .iter()
        .flat_map(|p| p.data().iter().copied())
        .collect();
    Array::from_vec(&[planes.len(), n, n], data).expect("planes share a grid")
}

/// Stage-1 input: the inverse distance map as a single channel.
pub fn interior_input(walk: &CellMap) -> Array {
    stack(&[walk])
}

/// Network input for a boundary graph: normalized node features, the
/// distinct edge feature rows and the message edges.
pub fn graph_input(g: &BoundaryGraph) -> GraphInput {
    let nodes = g.node_feature_matrix();
    let (rows, idx) = g.edge_feature_table();
    let edges = g
        .edges
        .iter()
        .zip(idx)
        .map(|(e, filter)| EdgeRef {
            target: e.target,
            source: e.source,
            filter,
        })
        .collect();
    GraphInput {
        node_feats: Array::from_vec(&[g.len(), crate::boundgraph::NODE_FEATURES], nodes)
            .expect("feature length"),
        edge_feats: Array::from_vec(
            &[rows.len(), crate::boundgraph::EDGE_FEATURES],
            rows.concat(),
        )
        .expect("edge feature length"),
        edges: Rc::new(edges),
    }
}

/// Door maps for the furniture stage: the interior cell behind each door
/// segment, split by segment orientation (horizontal, vertical).
pub fn door_planes(lp: &BoundaryLoop, doors: &[Vec<usize>]) -> (CellMap, CellMap) {
    let n = lp.n();
    let mut h = CellMap::zeros(n);
    let mut v = CellMap::zeros(n);
    for &i in doors.iter().flatten() {
        let s = lp.segment(i);
        let (r, c) = s.interior_cell();
        if s.id.is_horizontal() {
            h.set(r, c, 1.0);
        } else {
            v.set(r, c, 1.0);
        }
    }
    (h, v)
}

/// Stage-3 input channels: walk map, footprint, horizontal and vertical
/// door maps. Channels 2 and 3 trade places under axis-swapping transforms.
pub fn furniture_input(walk: &CellMap, interior: &CellMap, h: &CellMap, v: &CellMap) -> Array {
    stack(&[walk, interior, h, v])
}

pub const FURNITURE_AXIS_CHANNELS: (usize, usize) = (2, 3);

/// Door runs on the loop as lists of positions.
pub fn door_position_runs(labels: &[SegmentLabel]) -> Vec<Vec<usize>> {
    let len = labels.len();
    door_runs_on_loop(labels)
        .into_iter()
        .map(|(s, l)| (0..l).map(|k| (s + k) % len).collect())
        .collect()
}

/// Runs the full cascade on one trajectory. Each stage sees only the
/// trajectory and the regularized outputs of the earlier stages.
/// Stage 1: network argmax, MRF smoothing, connectivity repair.
pub fn predict_interior(walk: &CellMap, net: &EncDec, mrf: &MrfConfig) -> Result<CellMap> {
    let n = walk.n();
    let logits = net.predict(&interior_input(walk))?;
    let raw: Vec<bool> = argmax_channels(&logits)
        .into_iter()
        .map(|k| k == 1)
        .collect();
    let no_interior = || -> Result<Error> {
        let p = softmax(&logits, ClassLayout::ChannelsFirst)?;
        let prob = CellMap::from_vec(n, p.data()[n * n..].to_vec())?;
        Ok(Error::NoInterior {
            probability: Some(Box::new(prob)),
        })
    };
    if !raw.iter().any(|&v| v) {
        return Err(no_interior()?);
    }
    let smooth = mrf_smooth(&CellMap::from_mask(n, &raw), mrf)?;
    if smooth.count_ones() == 0 {
        return Err(no_interior()?);
    }
    repair_connectivity(&smooth)
}

pub fn run_cascade(
    traj: &Trajectory,
    models: &Models,
    grid: GridSpec,
    cfg: &CascadeConfig,
) -> Result<FloorPlan> {
    let n = grid.n;
    let walk = inverse_distance_map(grid, traj, cfg.cutoff_m)?;
    let interior = predict_interior(&walk, &models.interior, &cfg.mrf)?;

    let lp = extract_boundary_loop(&interior)?;
    let graph = build_boundary_graph(&lp, &walk)?;
    let classes = models.doors.predict_classes(&graph_input(&graph))?;
    let labels: Vec<SegmentLabel> = classes
        .iter()
        .map(|&k| {
            if k == 1 {
                SegmentLabel::Door
            } else {
                SegmentLabel::Wall
            }
        })
        .collect();
    let labels = normalize_door_width(&clean_isolated_door_nodes(&labels), &lp, cfg.door_width)?;
    let doors = door_position_runs(&labels);

    let (h, v) = door_planes(&lp, &doors);
    let classes = models
        .furniture
        .predict_classes(&furniture_input(&walk, &interior, &h, &v))?;
    let inside = interior.to_mask();
    let furn: Vec<bool> = classes
        .iter()
        .zip(&inside)
        .map(|(&k, &i)| i && k == 1)
        .collect();
    let furniture = clean_isolated_cells(&CellMap::from_mask(n, &furn), true);

    let plan = FloorPlan {
        grid,
        interior,
        doors,
        furniture,
        provenance: Provenance {
            checkpoints: models.checkpoint_ids()?,
            seeds: Vec::new(),
            config_hash: cfg.hash(),
        },
    };
    debug_assert!(plan.validate().is_ok());
    Ok(plan)
}

/// Violations of the cascade's structural guarantees, empty when sound:
/// a single simple wall loop, doors of exactly `width` segments (or the
/// whole wall run when shorter) within one wall run, furniture strictly
/// inside, no isolated furniture cells.
pub fn structural_violations(plan: &FloorPlan, width: usize) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = plan.validate() {
        out.push(e.to_string());
        return out;
    }
    let lp = match plan.boundary_loop() {
        Ok(lp) => lp,
        Err(e) => return vec![e.to_string()],
    };
    let runs = lp.straight_runs();
    let run_of = lp.run_ids();
    let mut labels = vec![SegmentLabel::Wall; lp.len()];
    for d in &plan.doors {
        let host = run_of[d[0]];
        if d.iter().any(|&i| run_of[i] != host) {
            out.push(format!("door {d:?} turns a corner"));
        }
        if d.len() != width.min(runs[host].1) {
            out.push(format!(
                "door {d:?} has width {} on a wall run of {}",
                d.len(),
                runs[host].1
            ));
        }
        for &i in d {
            labels[i] = SegmentLabel::Door;
        }
    }
    if door_runs_on_loop(&labels).len() != plan.doors.len() {
        out.push("touching or overlapping doors".into());
    }
    let n = plan.n();
    let f = plan.furniture.to_mask();
    for (i, &v) in f.iter().enumerate() {
        if v {
            let (r, c) = (i / n, i % n);
            let alone = raster::N4.iter().all(|&(dr, dc)| {
                raster::offset(r, c, dr, dc, n).is_none_or(|(r2, c2)| !f[r2 * n + c2])
            });
            if alone {
                out.push(format!("isolated furniture cell ({r}, {c})"));
            }
        }
    }
    out
}
