//! Per-stage training samples and trainers. Stage 3 is trained on
//! ground-truth upstream outputs (teacher forcing). Stage 2 sees both the
//! ground-truth footprint and the footprint predicted by stage 1, with door
//! labels carried across by [`transfer_door_labels`].

use log::info;
use serde::{Deserialize, Serialize};
use walkplan_nn::{
    train, ClassWeighting, EccConfig, EccNet, EncDec, EncDecConfig, GraphSample, SegSample,
    Selection, TrainConfig, TrainReport,
};

use super::{
    door_planes, door_position_runs, furniture_input, graph_input, interior_input,
    predict_interior, Models, RoomSample, FURNITURE_AXIS_CHANNELS,
};
use crate::boundgraph::{
    build_boundary_graph, check_single_room, extract_boundary_loop, BoundaryLoop, NODE_FEATURES,
};
use crate::dfpg::{inverse_distance_map, CellMap, Dfpg, SegmentId, SegmentLabel, DEFAULT_CUTOFF_M};
use crate::error::Result;
use crate::regularize::MrfConfig;

pub fn interior_sample(s: &RoomSample, cutoff_m: f64) -> Result<SegSample> {
    let walk = inverse_distance_map(s.room.grid(), &s.traj, cutoff_m)?;
    let n = s.room.n();
    Ok(SegSample {
        input: interior_input(&walk),
        target: s
            .room
            .interior_mask()
            .iter()
            .map(|&v| usize::from(v))
            .collect(),
        mask: vec![1.0; n * n],
        axis_channels: None,
    })
}

pub fn door_sample(s: &RoomSample, cutoff_m: f64) -> Result<GraphSample> {
    let walk = inverse_distance_map(s.room.grid(), &s.traj, cutoff_m)?;
    let lp = check_single_room(&s.room)?;
    let graph = build_boundary_graph(&lp, &walk)?;
    Ok(GraphSample {
        graph: graph_input(&graph),
        targets: lp
            .labels_from(&s.room)
            .iter()
            .map(|&l| usize::from(l == SegmentLabel::Door))
            .collect(),
    })
}

/// Labels for an arbitrary loop over the room's grid: a segment is a door
/// when a ground-truth door segment with the same orientation and span lies
/// at most `max_offset` cells across the wall from it.
pub fn transfer_door_labels(lp: &BoundaryLoop, gt: &Dfpg, max_offset: usize) -> Vec<SegmentLabel> {
    let n = gt.n();
    let k = max_offset as i64;
    let is_door = |id: SegmentId| id.in_grid(n) && gt.segment(id) == SegmentLabel::Door;
    lp.ids()
        .map(|id| {
            let hit = (-k..=k).any(|d| match id {
                SegmentId::H { row, col } => {
                    let r = row as i64 + d;
                    r >= 0
                        && is_door(SegmentId::H {
                            row: r as usize,
                            col,
                        })
                }
                SegmentId::V { row, col } => {
                    let c = col as i64 + d;
                    c >= 0
                        && is_door(SegmentId::V {
                            row,
                            col: c as usize,
                        })
                }
            });
            if hit {
                SegmentLabel::Door
            } else {
                SegmentLabel::Wall
            }
        })
        .collect()
}

/// Door sample on the footprint predicted by `interior_net`, labels from
/// [`transfer_door_labels`]. `None` when stage 1 finds no interior.
pub fn predicted_door_sample(
    s: &RoomSample,
    interior_net: &EncDec,
    mrf: &MrfConfig,
    cutoff_m: f64,
    max_offset: usize,
) -> Result<Option<GraphSample>> {
    let walk = inverse_distance_map(s.room.grid(), &s.traj, cutoff_m)?;
    let interior = match predict_interior(&walk, interior_net, mrf) {
        Ok(m) => m,
        Err(crate::error::Error::NoInterior { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let lp = extract_boundary_loop(&interior)?;
    let graph = build_boundary_graph(&lp, &walk)?;
    Ok(Some(GraphSample {
        graph: graph_input(&graph),
        targets: transfer_door_labels(&lp, &s.room, max_offset)
            .iter()
            .map(|&l| usize::from(l == SegmentLabel::Door))
            .collect(),
    }))
}

/// Furniture target with the loss restricted to the footprint.
pub fn furniture_sample(s: &RoomSample, cutoff_m: f64) -> Result<SegSample> {
    let walk = inverse_distance_map(s.room.grid(), &s.traj, cutoff_m)?;
    let n = s.room.n();
    let lp = check_single_room(&s.room)?;
    let doors = door_position_runs(&lp.labels_from(&s.room));
    let (h, v) = door_planes(&lp, &doors);
    let inside = s.room.interior_mask();
    let interior = CellMap::from_mask(n, &inside);
    Ok(SegSample {
        input: furniture_input(&walk, &interior, &h, &v),
        target: s
            .room
            .furniture_mask()
            .iter()
            .map(|&v| usize::from(v))
            .collect(),
        mask: inside.iter().map(|&v| f64::from(u8::from(v))).collect(),
        axis_channels: Some(FURNITURE_AXIS_CHANNELS),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeTrainConfig {
    pub interior_net: EncDecConfig,
    pub interior_train: TrainConfig,
    pub door_net: EccConfig,
    pub door_train: TrainConfig,
    pub furniture_net: EncDecConfig,
    pub furniture_train: TrainConfig,
    pub cutoff_m: f64,
    /// Add stage-2 samples on stage-1 predicted footprints.
    pub door_on_predicted: bool,
    /// Largest wall offset, in cells, across which door labels transfer.
    pub door_transfer_cells: usize,
    /// Seed for network initialization.
    pub init_seed: u64,
}

impl Default for CascadeTrainConfig {
    /// Desk-scale settings sized for a few hundred rooms on one core.
    fn default() -> Self {
        let seg = |inputs| EncDecConfig {
            base_features: 8,
            ..EncDecConfig::new(inputs, 2)
        };
        Self {
            interior_net: seg(1),
            interior_train: TrainConfig {
                epochs: 20,
                augment: true,
                ..TrainConfig::default()
            },
            door_net: EccConfig {
                block_depths: vec![32, 64, 64, 32, 2],
                node_feature_len: NODE_FEATURES,
                ..EccConfig::default()
            },
            door_train: TrainConfig {
                epochs: 30,
                class_weighting: ClassWeighting::InverseFrequency,
                selection: Selection::BalancedAccuracy,
                ..TrainConfig::default()
            },
            furniture_net: seg(4),
            furniture_train: TrainConfig {
                epochs: 12,
                augment: true,
                class_weighting: ClassWeighting::InverseFrequency,
                selection: Selection::BalancedAccuracy,
                ..TrainConfig::default()
            },
            cutoff_m: DEFAULT_CUTOFF_M,
            door_on_predicted: true,
            door_transfer_cells: 2,
            init_seed: 0,
        }
    }
}

impl CascadeTrainConfig {
    /// The default with every training seed set from `seed`.
    pub fn with_seed(seed: u64) -> Self {
        let mut c = Self::default();
        c.set_seed(seed);
        c
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.init_seed = seed;
        self.interior_train.seed = seed;
        self.door_train.seed = seed.wrapping_add(1);
        self.furniture_train.seed = seed.wrapping_add(2);
    }
}

fn samples<T>(set: &[RoomSample], f: impl Fn(&RoomSample) -> Result<T>) -> Result<Vec<T>> {
    set.iter().map(f).collect()
}

pub fn train_interior(
    train_set: &[RoomSample],
    val: &[RoomSample],
    cfg: &CascadeTrainConfig,
) -> Result<(EncDec, TrainReport)> {
    let f = |s: &RoomSample| interior_sample(s, cfg.cutoff_m);
    let mut net = EncDec::new(cfg.interior_net.clone(), cfg.init_seed)?;
    let report = train(
        &mut net,
        &samples(train_set, f)?,
        &samples(val, f)?,
        &cfg.interior_train,
    )?;
    info!(
        "interior stage: best validation accuracy {:.4}",
        report.best_score
    );
    Ok((net, report))
}

/// Trains stage 2. With `interior_net` and `door_on_predicted` set, each
/// room contributes a second sample on its predicted footprint.
pub fn train_doors(
    train_set: &[RoomSample],
    val: &[RoomSample],
    cfg: &CascadeTrainConfig,
    interior_net: Option<&EncDec>,
) -> Result<(EccNet, TrainReport)> {
    let build = |set: &[RoomSample]| -> Result<Vec<GraphSample>> {
        let mut out = samples(set, |s| door_sample(s, cfg.cutoff_m))?;
        if let Some(net) = interior_net.filter(|_| cfg.door_on_predicted) {
            let mrf = MrfConfig::default();
            for s in set {
                out.extend(predicted_door_sample(
                    s,
                    net,
                    &mrf,
                    cfg.cutoff_m,
                    cfg.door_transfer_cells,
                )?);
            }
        }
        Ok(out)
    };
    let (train_samples, val_samples) = (build(train_set)?, build(val)?);
    let mut net = EccNet::new(cfg.door_net.clone(), cfg.init_seed.wrapping_add(1))?;
    let report = train(&mut net, &train_samples, &val_samples, &cfg.door_train)?;
    info!(
        "door stage: best validation score {:.4} over {} samples",
        report.best_score,
        train_samples.len()
    );
    Ok((net, report))
}

pub fn train_furniture(
    train_set: &[RoomSample],
    val: &[RoomSample],
    cfg: &CascadeTrainConfig,
) -> Result<(EncDec, TrainReport)> {
    let f = |s: &RoomSample| furniture_sample(s, cfg.cutoff_m);
    let mut net = EncDec::new(cfg.furniture_net.clone(), cfg.init_seed.wrapping_add(2))?;
    let report = train(
        &mut net,
        &samples(train_set, f)?,
        &samples(val, f)?,
        &cfg.furniture_train,
    )?;
    info!(
        "furniture stage: best validation accuracy {:.4}",
        report.best_score
    );
    Ok((net, report))
}

/// Trains all three stages on the train split, selecting on validation.
pub fn train_cascade(
    train_set: &[RoomSample],
    val: &[RoomSample],
    cfg: &CascadeTrainConfig,
) -> Result<(Models, [TrainReport; 3])> {
    let (interior, r1) = train_interior(train_set, val, cfg)?;
    let (doors, r2) = train_doors(train_set, val, cfg, Some(&interior))?;
    let (furniture, r3) = train_furniture(train_set, val, cfg)?;
    Ok((
        Models {
            interior,
            doors,
            furniture,
        },
        [r1, r2, r3],
    ))
}
