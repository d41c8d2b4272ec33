//! The acceptance criteria as runnable checks, shared by the `repro`
//! command and the acceptance test target.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walkplan_nn::gradcheck::{standard_cases, TOLERANCE};
use walkplan_nn::{Checkpoint, EccConfig, EccNet, EncDec, EncDecConfig};

use super::dataset::derive_seed;
use super::experiment::{run_experiment, ExperimentConfig, ExperimentOutput, ExperimentReport};
use super::{
    run_cascade, structural_violations, CascadeConfig, FloorPlan, Models, Provenance, RoomSample,
};
use crate::dfpg::{point_segment_distance, CellMap, Dfpg, GridSpec, SegmentId, Trajectory};
use crate::error::Result;
use crate::gen::{generate_room, GenConfig};
use crate::metrics::{cell_pr, door_distance, door_pr, PrF1};
use crate::regularize::{exhaustive_min_energy_4x4, mrf_energy, mrf_smooth, MrfConfig};
use crate::simwalk::{door_targets, in_free_space, simulate_walk, SimConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}. {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    limit_s: Option<f64>,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let t0 = Instant::now();
    let (mut passed, mut detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = t0.elapsed().as_secs_f64();
    if let Some(limit) = limit_s {
        if seconds >= limit {
            passed = false;
            detail.push_str(&format!("; exceeded the {limit:.0} s budget"));
        }
    }
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

/// Criterion 1: Every layer and both networks, `draws` random draws each.
pub fn gradient_oracle(draws: u64) -> CriterionResult {
    timed(1, "gradient oracle", Some(120.0), || {
        let mut worst = (0.0f64, "");
        for case in standard_cases() {
            for seed in 0..draws {
                let r = (case.run)(seed)?;
                if r.max_rel_error > worst.0 || worst.1.is_empty() {
                    worst = (worst.0.max(r.max_rel_error), case.name);
                }
            }
        }
        Ok((
            worst.0 < TOLERANCE,
            format!(
                "max relative error {:.2e} (worst: {}) over {draws} draws x {} checks",
                worst.0,
                worst.1,
                standard_cases().len()
            ),
        ))
    })
}

/// Criterion 2: Min-cut energy equals the exhaustive minimum on random 4x4 maps.
pub fn mrf_exactness(maps: usize, seed: u64) -> CriterionResult {
    timed(2, "MRF exactness", Some(60.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for _ in 0..maps {
            let bits: u16 = rng.random();
            let mut cfgs = vec![MrfConfig::default()];
            for _ in 0..3 {
                cfgs.push(MrfConfig {
                    gamma_in_to_out: rng.random_range(0.0..8.0),
                    gamma_out_to_in: rng.random_range(0.0..8.0),
                    gamma_border: rng.random_range(0.0..4.0),
                });
            }
            let pred = CellMap::from_fn(4, |r, c| f64::from((bits >> (r * 4 + c)) & 1));
            for cfg in &cfgs {
                let out = mrf_smooth(&pred, cfg)?;
                let e = mrf_energy(&pred.to_mask(), &out.to_mask(), 4, cfg);
                worst = worst.max((e - exhaustive_min_energy_4x4(bits, cfg)).abs());
                checked += 1;
            }
        }
        Ok((
            worst < 1e-9,
            format!("{checked} problems, max energy gap {worst:.1e}"),
        ))
    })
}

/// Criterion 3: Every cascade output satisfies the structural guarantees.
pub fn structural_soundness(
    models: &Models,
    rooms: &[&RoomSample],
    cfg: &CascadeConfig,
) -> CriterionResult {
    timed(3, "structural soundness", None, || {
        let mut bad = Vec::new();
        for s in rooms {
            match run_cascade(&s.traj, models, s.room.grid(), cfg) {
                Ok(plan) => {
                    let v = structural_violations(&plan, cfg.door_width);
                    if !v.is_empty() {
                        bad.push(format!("{}: {}", s.id, v.join("; ")));
                    }
                }
                Err(e) => bad.push(format!("{}: {e}", s.id)),
            }
        }
        let detail = format!("{}/{} plans sound", rooms.len() - bad.len(), rooms.len());
        let detail = match bad.first() {
            Some(b) => format!("{detail}; first failure {b}"),
            None => detail,
        };
        Ok((bad.is_empty() && !rooms.is_empty(), detail))
    })
}

/// Criterion 4: Walks stay in free space, pass through every door's inner cell, and
/// replay byte-identically.
pub fn simulator_invariants(rooms: usize, seeds_per_room: usize, seed: u64) -> CriterionResult {
    timed(4, "simulator invariants", None, || {
        let mut bad = Vec::new();
        let mut pairs = 0;
        for i in 0..rooms {
            let room = generate_room(&GenConfig::with_seed(derive_seed(seed, i as u64)))?;
            let grid = room.grid();
            for j in 0..seeds_per_room {
                pairs += 1;
                let sim = SimConfig::with_seed(derive_seed(
                    seed ^ 0x5eed,
                    (i * seeds_per_room + j) as u64,
                ));
                let traj = simulate_walk(&room, &sim)?;
                if !in_free_space(&room, &traj) {
                    bad.push(format!("room {i} seed {j}: point outside free space"));
                }
                for (r, c) in door_targets(&room) {
                    let center = grid.cell_center(r, c);
                    let d = if traj.len() == 1 {
                        point_segment_distance(center, traj.points[0], traj.points[0])
                    } else {
                        traj.points
                            .windows(2)
                            .map(|w| point_segment_distance(center, w[0], w[1]))
                            .fold(f64::INFINITY, f64::min)
                    };
                    if d > 1e-9 {
                        bad.push(format!(
                            "room {i} seed {j}: door cell ({r}, {c}) at distance {d:.3} m"
                        ));
                    }
                }
                if simulate_walk(&room, &sim)?.to_json()? != traj.to_json()? {
                    bad.push(format!("room {i} seed {j}: replay differs"));
                }
            }
        }
        let detail = match bad.first() {
            Some(b) => format!("{} of {pairs} pairs violate; first: {b}", bad.len()),
            None => format!("{pairs} (room, seed) pairs clean"),
        };
        Ok((bad.is_empty(), detail))
    })
}

fn random_mask<R: Rng>(rng: &mut R, n: usize) -> CellMap {
    let density = rng.random_range(0.0..0.6);
    let mut m = CellMap::from_fn(n, |_, _| 0.0);
    if rng.random_bool(0.05) {
        return m;
    }
    for r in 0..n {
        for c in 0..n {
            if rng.random_bool(density) {
                m.set(r, c, 1.0);
            }
        }
    }
    m
}

fn shifted(m: &CellMap, d: usize) -> CellMap {
    let n = m.n();
    CellMap::from_fn(n, |r, c| {
        if r >= d && c >= d {
            m.get(r - d, c - d)
        } else {
            0.0
        }
    })
}

/// Criterion 5: Symmetry, monotonicity, perfect match and translation invariance
/// of the cell scores; the door matching examples.
pub fn metric_consistency(pairs: usize, seed: u64) -> CriterionResult {
    timed(5, "metric self-consistency", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = Vec::new();
        let n = 16;
        for k in 0..pairs {
            // Content stays 3 cells off the far border so shifts keep it.
            let frame = |m: CellMap| {
                CellMap::from_fn(n, |r, c| {
                    if r < n - 3 && c < n - 3 {
                        m.get(r, c)
                    } else {
                        0.0
                    }
                })
            };
            let a = frame(random_mask(&mut rng, n));
            let b = frame(random_mask(&mut rng, n));
            let ab = cell_pr(&a, &b, 1)?;
            let ba = cell_pr(&b, &a, 1)?;
            if ab.precision != ba.recall || ab.recall != ba.precision {
                bad.push(format!("pair {k}: asymmetric"));
            }
            let mut prev = cell_pr(&a, &b, 0)?;
            for tol in 1..4 {
                let cur = cell_pr(&a, &b, tol)?;
                if cur.precision < prev.precision || cur.recall < prev.recall {
                    bad.push(format!("pair {k}: tolerance {tol} lowers a score"));
                }
                prev = cur;
            }
            if cell_pr(&a, &a, 1)? != PrF1::new(1.0, 1.0) {
                bad.push(format!("pair {k}: self-match is not perfect"));
            }
            if cell_pr(&shifted(&a, 2), &shifted(&b, 2), 1)? != ab {
                bad.push(format!("pair {k}: not translation invariant"));
            }
        }
        let h = |row: usize, col: usize| -> Vec<SegmentId> {
            (col..col + 4)
                .map(|c| SegmentId::H { row, col: c })
                .collect()
        };
        let gt = vec![h(4, 2), h(10, 8)];
        let examples = [
            (
                door_pr(&gt, &gt, 0.25, 0.25),
                PrF1::new(1.0, 1.0),
                "identical",
            ),
            (
                door_pr(&[h(7, 2)], &gt[..1], 0.25, 0.1),
                PrF1::new(0.0, 0.0),
                "0.3 m apart",
            ),
            (
                door_pr(&[h(5, 2), h(6, 2)], &gt[..1], 0.25, 0.1),
                PrF1::new(0.5, 1.0),
                "0.1 m and 0.2 m",
            ),
            (
                door_pr(&[h(20, 20), h(30, 1)], &gt, f64::INFINITY, 0.25),
                PrF1::new(1.0, 1.0),
                "infinite tolerance",
            ),
        ];
        for (got, want, what) in examples {
            if got != want {
                bad.push(format!("door example {what}: {got:?}"));
            }
        }
        let d = door_distance(&[SegmentId::H { row: 5, col: 2 }], &gt[0], 0.1);
        if (d - 0.1).abs() > 1e-12 {
            bad.push(format!("door distance {d}"));
        }
        let detail = match bad.first() {
            Some(b) => format!("{} violations; first: {b}", bad.len()),
            None => format!("{pairs} mask pairs and 4 door examples consistent"),
        };
        Ok((bad.is_empty(), detail))
    })
}

/// Criterion 6: Cascade beats both baselines on the held-out split.
pub fn learnability(r: &ExperimentReport) -> CriterionResult {
    timed(6, "desk-scale learnability", None, || {
        let di = r.test.interior.f1 - r.hull_baseline.f1;
        let dd = r.test.doors.recall - r.random_door_baseline.recall;
        Ok((
            di >= 0.10 && dd >= 0.20,
            format!(
                "interior F1 {:.3} vs hull {:.3} (+{di:.3}, need 0.10); door recall {:.3} vs random {:.3} (+{dd:.3}, need 0.20); furniture F1 {:.3}; {} test rooms, trained in {:.0} s",
                r.test.interior.f1,
                r.hull_baseline.f1,
                r.test.doors.recall,
                r.random_door_baseline.recall,
                r.test.furniture.f1,
                r.test_size,
                r.seconds
            ),
        ))
    })
}

/// Criterion 7: Seed-sweep interior IoU.
pub fn repeatability(r: &ExperimentReport) -> CriterionResult {
    timed(7, "repeatability", None, || {
        let rep = &r.repeatability;
        Ok((
            rep.mean_iou >= 0.60,
            format!(
                "mean pairwise IoU {:.3} over {} rooms (need 0.60)",
                rep.mean_iou,
                rep.per_room.len()
            ),
        ))
    })
}

/// Criterion 8: Save/load round-trips are byte- and value-exact.
pub fn serialization_roundtrips(count: usize, seed: u64) -> CriterionResult {
    timed(8, "serialization round-trips", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir =
            std::env::temp_dir().join(format!("walkplan-roundtrip-{}-{seed}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let mut bad = Vec::new();
        for k in 0..count {
            let room = generate_room(&GenConfig::with_seed(derive_seed(seed, k as u64)))?;
            let text = room.to_json()?;
            let path = dir.join("room.json");
            std::fs::write(&path, &text)?;
            let back = Dfpg::from_json(&std::fs::read_to_string(&path)?)?;
            if back != room || back.to_json()? != text {
                bad.push(format!("room {k}"));
            }

            let grid = GridSpec::default();
            let ext = grid.extent_m();
            let traj = Trajectory::new(
                (0..rng.random_range(1..50))
                    .map(|_| [rng.random_range(0.0..ext), rng.random_range(0.0..ext)])
                    .collect(),
            );
            let text = traj.to_json()?;
            let back = Trajectory::from_json(&text)?;
            let exact =
                back.points.iter().zip(&traj.points).all(|(a, b)| {
                    a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits()
                });
            if !exact || back.len() != traj.len() || back.to_json()? != text {
                bad.push(format!("trajectory {k}"));
            }

            let mut plan = FloorPlan::from_dfpg(&room)?;
            plan.provenance = Provenance {
                checkpoints: vec![format!("{:016x}", rng.random::<u64>())],
                seeds: vec![rng.random()],
                config_hash: format!("{:x}", rng.random::<u64>()),
            };
            let path = dir.join("plan.json");
            plan.save(&path)?;
            let back = FloorPlan::load(&path)?;
            if back != plan || back.to_json()? != plan.to_json()? {
                bad.push(format!("floor plan {k}"));
            }

            let ckpt = if k % 2 == 0 {
                let cfg = EncDecConfig {
                    base_features: 2,
                    ..EncDecConfig::new(1 + k % 4, 2)
                };
                EncDec::new(cfg, rng.random())?.to_checkpoint()?
            } else {
                let cfg = EccConfig {
                    block_depths: vec![4, 2],
                    fgn_hidden: (3, 4),
                    ..EccConfig::default()
                };
                EccNet::new(cfg, rng.random())?.to_checkpoint()?
            };
            let path = dir.join("model.json");
            ckpt.save(&path)?;
            let back = Checkpoint::load(&path)?;
            let same_bits =
                back.store()?
                    .params()
                    .zip(ckpt.store()?.params())
                    .all(|((na, a), (nb, b))| {
                        na == nb
                            && a.shape() == b.shape()
                            && a.data()
                                .iter()
                                .zip(b.data())
                                .all(|(x, y)| x.to_bits() == y.to_bits())
                    });
            if back != ckpt || !same_bits || back.to_json()? != ckpt.to_json()? {
                bad.push(format!("checkpoint {k}"));
            }
        }
        let _ = std::fs::remove_dir_all(&dir);
        let detail = match bad.first() {
            Some(b) => format!("{} failures; first: {b}", bad.len()),
            None => {
                format!("{count} instances each of room, trajectory, floor plan and checkpoint")
            }
        };
        Ok((bad.is_empty(), detail))
    })
}

/// Criteria sizes of the full suite.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub experiment: ExperimentConfig,
    pub gradient_draws: u64,
    pub mrf_maps: usize,
    pub sim_rooms: usize,
    pub sim_seeds: usize,
    pub metric_pairs: usize,
    pub roundtrips: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self::with_seed(2024)
    }
}

impl SuiteConfig {
    /// Default sizes with every seed derived from `seed`.
    pub fn with_seed(seed: u64) -> Self {
        let mut experiment = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        experiment.dataset.seed = seed;
        experiment.train.set_seed(seed);
        Self {
            experiment,
            gradient_draws: 20,
            mrf_maps: 200,
            sim_rooms: 250,
            sim_seeds: 4,
            metric_pairs: 200,
            roundtrips: 100,
            seed,
        }
    }
}

/// Runs criteria 1-8 in order, reporting each line through `report` as soon
/// as it is known. The trained cascade is returned for reuse.
pub fn run_suite(
    cfg: &SuiteConfig,
    mut report: impl FnMut(&CriterionResult),
) -> Result<(Vec<CriterionResult>, ExperimentOutput)> {
    let mut out = Vec::new();
    let mut push = |r: CriterionResult| {
        report(&r);
        out.push(r);
    };
    push(gradient_oracle(cfg.gradient_draws));
    push(mrf_exactness(cfg.mrf_maps, cfg.seed));
    let exp = run_experiment(&cfg.experiment)?;
    let rooms: Vec<&RoomSample> = exp.dataset.all().collect();
    push(structural_soundness(
        &exp.models,
        &rooms,
        &cfg.experiment.cascade,
    ));
    push(simulator_invariants(cfg.sim_rooms, cfg.sim_seeds, cfg.seed));
    push(metric_consistency(cfg.metric_pairs, cfg.seed));
    push(learnability(&exp.report));
    push(repeatability(&exp.report));
    push(serialization_roundtrips(cfg.roundtrips, cfg.seed));
    Ok((out, exp))
}
