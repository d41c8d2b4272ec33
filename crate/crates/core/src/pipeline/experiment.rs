//! Evaluation of trained cascades against ground truth and baselines, and
//! the seed-sweep repeatability protocol.

use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use walkplan_nn::TrainReport;

use super::baseline::{hull_baseline, random_doors};
use super::dataset::derive_seed;
use super::training::{train_cascade, CascadeTrainConfig};
use super::{
    build_dataset, run_cascade, CascadeConfig, Dataset, DatasetConfig, FloorPlan, Models,
    RoomSample,
};
use crate::dfpg::{CellMap, Dfpg, SegmentId, Trajectory};
use crate::error::Result;
use crate::metrics::{cell_pr, door_pr, PrF1};
use crate::simwalk::{simulate_walk, SimConfig};

/// Cell tolerance for interior and furniture scores.
pub const CELL_TOL: usize = 1;
/// Door matching tolerance in meters.
pub const DOOR_TOL_M: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub id: String,
    pub interior: PrF1,
    pub doors: PrF1,
    pub furniture: PrF1,
    /// Doors in the prediction.
    pub predicted_doors: usize,
    /// The cascade produced no plan; all scores are zero.
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub interior: PrF1,
    pub doors: PrF1,
    pub furniture: PrF1,
    pub failures: usize,
    pub samples: Vec<SampleEval>,
}

impl EvalReport {
    pub fn from_samples(samples: Vec<SampleEval>) -> Self {
        let pick =
            |f: fn(&SampleEval) -> PrF1| PrF1::mean(&samples.iter().map(f).collect::<Vec<_>>());
        Self {
            interior: pick(|s| s.interior),
            doors: pick(|s| s.doors),
            furniture: pick(|s| s.furniture),
            failures: samples.iter().filter(|s| s.failed).count(),
            samples,
        }
    }
}

fn gt_mask(g: &Dfpg, m: Vec<bool>) -> CellMap {
    CellMap::from_mask(g.n(), &m)
}

/// Scores one plan against its ground-truth room.
pub fn evaluate_plan(id: &str, plan: &FloorPlan, gt: &Dfpg) -> Result<SampleEval> {
    let doors = plan.door_segments()?;
    Ok(SampleEval {
        id: id.to_string(),
        interior: cell_pr(&plan.interior, &gt_mask(gt, gt.interior_mask()), CELL_TOL)?,
        doors: door_pr(&doors, &gt.door_runs(), DOOR_TOL_M, gt.cell_size_m()),
        furniture: cell_pr(&plan.furniture, &gt_mask(gt, gt.furniture_mask()), CELL_TOL)?,
        predicted_doors: doors.len(),
        failed: false,
    })
}

fn failed_eval(id: &str) -> SampleEval {
    let zero = PrF1::new(0.0, 0.0);
    SampleEval {
        id: id.to_string(),
        interior: zero,
        doors: zero,
        furniture: zero,
        predicted_doors: 0,
        failed: true,
    }
}

/// Runs the cascade on every sample; plans that cannot be produced score zero.
pub fn evaluate_cascade(
    models: &Models,
    samples: &[RoomSample],
    cfg: &CascadeConfig,
) -> Result<(EvalReport, Vec<Option<FloorPlan>>)> {
    let mut evals = Vec::with_capacity(samples.len());
    let mut plans = Vec::with_capacity(samples.len());
    for s in samples {
        match run_cascade(&s.traj, models, s.room.grid(), cfg) {
            Ok(plan) => {
                evals.push(evaluate_plan(&s.id, &plan, &s.room)?);
                plans.push(Some(plan));
            }
            Err(e) => {
                warn!("cascade failed on {}: {e}", s.id);
                evals.push(failed_eval(&s.id));
                plans.push(None);
            }
        }
    }
    Ok((EvalReport::from_samples(evals), plans))
}

/// Mean interior scores of the dilated-walk convex hull.
pub fn hull_baseline_scores(samples: &[RoomSample], radius_cells: f64) -> Result<PrF1> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let pred = hull_baseline(&s.traj, s.room.grid(), radius_cells)?;
        out.push(cell_pr(
            &pred,
            &gt_mask(&s.room, s.room.interior_mask()),
            CELL_TOL,
        )?);
    }
    Ok(PrF1::mean(&out))
}

/// Mean door scores of random width-`width` doors placed on each predicted
/// wall loop, as many as the cascade predicted there, averaged over `draws`.
pub fn random_door_scores(
    samples: &[RoomSample],
    plans: &[Option<FloorPlan>],
    width: usize,
    draws: usize,
    seed: u64,
) -> Result<PrF1> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (s, plan) in samples.iter().zip(plans) {
        let Some(plan) = plan else {
            out.push(PrF1::new(0.0, 0.0));
            continue;
        };
        let lp = plan.boundary_loop()?;
        for _ in 0..draws {
            let doors = random_doors(&lp, plan.doors.len(), width, &mut rng)?;
            let segs: Vec<Vec<SegmentId>> = doors
                .iter()
                .map(|d| d.iter().map(|&i| lp.segment(i).id).collect())
                .collect();
            out.push(door_pr(
                &segs,
                &s.room.door_runs(),
                DOOR_TOL_M,
                s.room.cell_size_m(),
            ));
        }
    }
    Ok(PrF1::mean(&out))
}

/// Intersection over union of two masks (1 when both are empty).
pub fn iou(a: &CellMap, b: &CellMap) -> f64 {
    let (a, b) = (a.to_mask(), b.to_mask());
    let inter = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(&b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    /// Mean pairwise interior IoU across walk seeds, per room.
    pub per_room: Vec<f64>,
    pub mean_iou: f64,
}

/// Re-simulates each room with `seeds` walk seeds, runs the cascade on
/// each walk and averages pairwise interior IoU. A failed run counts as an
/// empty interior.
pub fn repeatability(
    models: &Models,
    rooms: &[RoomSample],
    seeds: usize,
    sim: &SimConfig,
    cfg: &CascadeConfig,
    seed: u64,
) -> Result<RepeatabilityReport> {
    let mut per_room = Vec::with_capacity(rooms.len());
    for (k, s) in rooms.iter().enumerate() {
        let mut masks = Vec::with_capacity(seeds);
        for j in 0..seeds {
            let walk_cfg = SimConfig {
                seed: derive_seed(seed, (k * seeds + j) as u64),
                ..sim.clone()
            };
            let traj: Trajectory = simulate_walk(&s.room, &walk_cfg)?;
            let mask = match run_cascade(&traj, models, s.room.grid(), cfg) {
                Ok(p) => p.interior,
                Err(_) => CellMap::zeros(s.room.n()),
            };
            masks.push(mask);
        }
        let mut total = 0.0;
        let mut pairs = 0;
        for a in 0..masks.len() {
            for b in a + 1..masks.len() {
                total += iou(&masks[a], &masks[b]);
                pairs += 1;
            }
        }
        per_room.push(if pairs == 0 {
            1.0
        } else {
            total / pairs as f64
        });
    }
    let mean_iou = per_room.iter().sum::<f64>() / per_room.len().max(1) as f64;
    Ok(RepeatabilityReport { per_room, mean_iou })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub train: CascadeTrainConfig,
    pub cascade: CascadeConfig,
    /// Dilation radius of the convex-hull baseline, in cells.
    pub hull_radius_cells: f64,
    /// Random door layouts per test room.
    pub random_door_draws: usize,
    pub repeat_rooms: usize,
    pub repeat_seeds: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: CascadeTrainConfig::default(),
            cascade: CascadeConfig::default(),
            hull_radius_cells: 2.0,
            random_door_draws: 5,
            repeat_rooms: 10,
            repeat_seeds: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub skipped: usize,
    pub training: Vec<TrainReport>,
    pub test: EvalReport,
    pub hull_baseline: PrF1,
    pub random_door_baseline: PrF1,
    pub repeatability: RepeatabilityReport,
    pub seconds: f64,
}

pub struct ExperimentOutput {
    pub models: Models,
    pub dataset: Dataset,
    pub report: ExperimentReport,
}

/// Builds the corpus, trains the cascade, and evaluates it on the test
/// split against both baselines and under the seed sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t0 = Instant::now();
    let ds = build_dataset(&cfg.dataset)?;
    info!(
        "dataset: {} train, {} val, {} test, {} skipped",
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        ds.skipped
    );
    let (models, training) = train_cascade(&ds.train, &ds.val, &cfg.train)?;
    let (test, plans) = evaluate_cascade(&models, &ds.test, &cfg.cascade)?;
    let hull = hull_baseline_scores(&ds.test, cfg.hull_radius_cells)?;
    let random = random_door_scores(
        &ds.test,
        &plans,
        cfg.cascade.door_width,
        cfg.random_door_draws,
        derive_seed(cfg.seed, 1),
    )?;
    let rooms = &ds.test[..cfg.repeat_rooms.min(ds.test.len())];
    let rep = repeatability(
        &models,
        rooms,
        cfg.repeat_seeds,
        &cfg.dataset.sim,
        &cfg.cascade,
        derive_seed(cfg.seed, 2),
    )?;
    let report = ExperimentReport {
        train_size: ds.train.len(),
        val_size: ds.val.len(),
        test_size: ds.test.len(),
        skipped: ds.skipped,
        training: training.to_vec(),
        test,
        hull_baseline: hull,
        random_door_baseline: random,
        repeatability: rep,
        seconds: t0.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        models,
        dataset: ds,
        report,
    })
}
