//! Procedural corpora: rooms, simulated walks and per-stage targets, split
//! 80/10/10 by room.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{rle_encode, sha256_hex};
use crate::boundgraph::check_single_room;
use crate::dfpg::{Dfpg, SegmentLabel, Trajectory};
use crate::error::{Error, Result};
use crate::gen::{generate_room, GenConfig};
use crate::simwalk::{simulate_walk, SimConfig};

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub gen: GenConfig,
    pub sim: SimConfig,
    /// Train / validation / test fractions.
    pub split: (f64, f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 500,
            seed: 0,
            gen: GenConfig::default(),
            sim: SimConfig::default(),
            split: (0.8, 0.1, 0.1),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split;
        if self.count < 10 {
            return Err(Error::Config(format!(
                "dataset needs at least 10 rooms, got {}",
                self.count
            )));
        }
        if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.split
            )));
        }
        self.gen.validate()?;
        self.sim.validate()
    }
}

/// One room with its simulated walk.
#[derive(Clone, Debug, PartialEq)]
pub struct RoomSample {
    pub id: String,
    /// SHA-256 of the room JSON.
    pub hash: String,
    pub room: Dfpg,
    pub traj: Trajectory,
}

impl RoomSample {
    pub fn new(index: usize, room: Dfpg, traj: Trajectory) -> Result<Self> {
        let hash = sha256_hex(room.to_json()?.as_bytes());
        Ok(Self {
            id: format!("{index:05}-{}", &hash[..8]),
            hash,
            room,
            traj,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<RoomSample>,
    pub val: Vec<RoomSample>,
    pub test: Vec<RoomSample>,
    /// Rooms or walks that failed to generate.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &RoomSample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// True when no room hash occurs in more than one split.
    pub fn splits_disjoint(&self) -> bool {
        let set = |s: &[RoomSample]| s.iter().map(|x| x.hash.clone()).collect::<HashSet<_>>();
        let (a, b, c) = (set(&self.train), set(&self.val), set(&self.test));
        a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c)
    }
}

/// Split sizes for `count` items: rounded train and validation shares, the
/// remainder for testing.
pub fn split_sizes(count: usize, split: (f64, f64, f64)) -> (usize, usize, usize) {
    let train = ((count as f64 * split.0).round() as usize).min(count);
    let val = ((count as f64 * split.1).round() as usize).min(count - train);
    (train, val, count - train - val)
}

/// Generates `count` rooms and walks. Room `i` uses generator seed
/// `derive_seed(seed, 2i)` and walk seed `derive_seed(seed, 2i + 1)`.
/// Failures are skipped and counted; duplicate rooms are dropped so that
/// splits stay disjoint.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(cfg.count);
    let mut seen = HashSet::new();
    let mut skipped = 0;
    for i in 0..cfg.count {
        let gen = GenConfig {
            seed: derive_seed(cfg.seed, 2 * i as u64),
            ..cfg.gen.clone()
        };
        let sim = SimConfig {
            seed: derive_seed(cfg.seed, 2 * i as u64 + 1),
            ..cfg.sim.clone()
        };
        let built = generate_room(&gen).and_then(|room| {
            let traj = simulate_walk(&room, &sim)?;
            RoomSample::new(i, room, traj)
        });
        match built {
            Ok(s) if seen.insert(s.hash.clone()) => samples.push(s),
            Ok(s) => {
                warn!("room {} duplicates an earlier room; dropped", s.id);
                skipped += 1;
            }
            Err(e) => {
                warn!("sample {i} skipped: {e}");
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        info!("{skipped} of {} samples skipped", cfg.count);
    }
    let (tr, va, _) = split_sizes(samples.len(), cfg.split);
    let test = samples.split_off(tr + va);
    let val = samples.split_off(tr);
    let ds = Dataset {
        train: samples,
        val,
        test,
        skipped,
    };
    debug_assert!(ds.splits_disjoint());
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct Targets {
    /// Stage 1: interior mask, run-length encoded.
    interior: Vec<usize>,
    /// Stage 2: 1 for DOOR, 0 for WALL, in boundary-loop order.
    door_labels: Vec<u8>,
    /// Stage 3: furniture mask and loss mask (the interior).
    furniture: Vec<usize>,
    loss_mask: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: DatasetConfig,
    skipped: usize,
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

const SPLITS: [&str; 3] = ["train", "val", "test"];

/// Writes `dir/manifest.json` and `dir/<split>/<id>/{room,trajectory,targets}.json`.
pub fn write_dataset(ds: &Dataset, cfg: &DatasetConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let ids = |s: &[RoomSample]| s.iter().map(|x| x.id.clone()).collect();
    let manifest = Manifest {
        config: cfg.clone(),
        skipped: ds.skipped,
        train: ids(&ds.train),
        val: ids(&ds.val),
        test: ids(&ds.test),
    };
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for (name, split) in SPLITS.iter().zip([&ds.train, &ds.val, &ds.test]) {
        for s in split.iter() {
            let d = dir.join(name).join(&s.id);
            fs::create_dir_all(&d)?;
            fs::write(d.join("room.json"), s.room.to_json()?)?;
            fs::write(d.join("trajectory.json"), s.traj.to_json()?)?;
            let lp = check_single_room(&s.room)?;
            let targets = Targets {
                interior: rle_encode(&s.room.interior_mask()),
                door_labels: lp
                    .labels_from(&s.room)
                    .iter()
                    .map(|&l| u8::from(l == SegmentLabel::Door))
                    .collect(),
                furniture: rle_encode(&s.room.furniture_mask()),
                loss_mask: rle_encode(&s.room.interior_mask()),
            };
            fs::write(d.join("targets.json"), serde_json::to_string(&targets)?)?;
        }
    }
    Ok(())
}

/// Reads a dataset written by [`write_dataset`], re-deriving targets from the rooms.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(Dataset, DatasetConfig)> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let load = |split: &str, ids: &[String]| -> Result<Vec<RoomSample>> {
        ids.iter()
            .map(|id| {
                let d = dir.join(split).join(id);
                let room = Dfpg::from_json(&fs::read_to_string(d.join("room.json"))?)?;
                let traj = Trajectory::from_json(&fs::read_to_string(d.join("trajectory.json"))?)?;
                let hash = sha256_hex(room.to_json()?.as_bytes());
                Ok(RoomSample {
                    id: id.clone(),
                    hash,
                    room,
                    traj,
                })
            })
            .collect()
    };
    let ds = Dataset {
        train: load("train", &manifest.train)?,
        val: load("val", &manifest.val)?,
        test: load("test", &manifest.test)?,
        skipped: manifest.skipped,
    };
    if !ds.splits_disjoint() {
        return Err(Error::Parse("a room appears in more than one split".into()));
    }
    Ok((ds, manifest.config))
}
