//! `walkplan`: generate rooms, simulate walks, build datasets, train the
//! cascade, run inference, evaluate, render, and reproduce the acceptance
//! suite.

mod settings;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use walkplan_core::metrics::align_by_bbox;
use walkplan_core::pipeline::dataset::{read_dataset, write_dataset};
use walkplan_core::pipeline::experiment::{evaluate_plan, EvalReport, SampleEval};
use walkplan_core::pipeline::repro::{run_suite, SuiteConfig};
use walkplan_core::pipeline::training::{
    train_doors, train_furniture, train_interior, CascadeTrainConfig,
};
use walkplan_core::pipeline::{build_dataset, render_svg, DatasetConfig, Models};
use walkplan_core::{
    generate_room, run_cascade, CascadeConfig, Dfpg, Error, FloorPlan, GenConfig, Result,
    SimConfig, Trajectory,
};

use settings::Settings;

#[derive(Parser)]
#[command(
    name = "walkplan",
    version,
    about = "Floor plans from walk trajectories"
)]
struct Cli {
    /// TOML file supplying defaults for any flag (by flag name) and the
    /// sections [gen], [sim], [train], [cascade].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Stage {
    #[value(name = "1")]
    Interior,
    #[value(name = "2")]
    Doors,
    #[value(name = "3")]
    Furniture,
    All,
}

#[derive(clap::Args, Default)]
struct MrfFlags {
    #[arg(long)]
    gamma_in_out: Option<f64>,
    #[arg(long)]
    gamma_out_in: Option<f64>,
    #[arg(long)]
    gamma_border: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth rooms as JSON (and SVG previews).
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a walk through a room.
    Simulate {
        #[arg(long)]
        room: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a split corpus of rooms, walks and per-stage targets.
    Dataset {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one stage (or all) on a dataset directory.
    Train {
        #[arg(long, value_enum)]
        stage: Option<Stage>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model directory; checkpoints of other stages are left in place.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run the cascade on one trajectory, or on a dataset split.
    Infer {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
        /// Plan file for --traj, directory for --data.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mrf: MrfFlags,
    },
    /// Score predicted plans against ground-truth rooms.
    Eval {
        /// Directory of `<id>.json` plans.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Dataset directory or directory of `<id>.json` rooms.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Align each prediction to its target by bounding-box centers first.
        #[arg(long)]
        align: bool,
    },
    /// Draw a plan (or a ground-truth room) as SVG.
    Render {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        room: Option<PathBuf>,
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full acceptance suite and print one line per criterion.
    Repro {
        #[arg(long)]
        seed: Option<u64>,
        /// Corpus size for the learned criteria.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, serde_json::to_string_pretty(value)?)?)
}

fn mrf_config(flags: &MrfFlags, s: &Settings) -> Result<CascadeConfig> {
    let mut cfg: CascadeConfig = s.section("cascade")?.unwrap_or_default();
    if let Some(g) = s.opt(flags.gamma_in_out, "gamma-in-out")? {
        cfg.mrf.gamma_in_to_out = g;
    }
    if let Some(g) = s.opt(flags.gamma_out_in, "gamma-out-in")? {
        cfg.mrf.gamma_out_to_in = g;
    }
    if let Some(g) = s.opt(flags.gamma_border, "gamma-border")? {
        cfg.mrf.gamma_border = g;
    }
    cfg.mrf.validate()?;
    Ok(cfg)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    let s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { seed, count, out } => {
            let seed = s.seed(seed)?;
            let count = s.opt(count, "count")?.unwrap_or(1);
            let out = s.path(out, "out")?;
            let base: GenConfig = s.section("gen")?.unwrap_or_default();
            fs::create_dir_all(&out)?;
            for i in 0..count {
                let cfg = GenConfig {
                    seed: seed.wrapping_add(i as u64),
                    ..base.clone()
                };
                let room = generate_room(&cfg)?;
                let name = format!("room-{:05}", i);
                fs::write(out.join(format!("{name}.json")), room.to_json()?)?;
                let plan = FloorPlan::from_dfpg(&room)?;
                fs::write(out.join(format!("{name}.svg")), render_svg(&plan, None)?)?;
            }
            info!("wrote {count} rooms to {}", out.display());
        }
        Command::Simulate { room, seed, out } => {
            let seed = s.seed(seed)?;
            let room = Dfpg::from_json(&fs::read_to_string(s.path(room, "room")?)?)?;
            let base: SimConfig = s.section("sim")?.unwrap_or_default();
            let traj = walkplan_core::simulate_walk(&room, &SimConfig { seed, ..base })?;
            let out = s.path(out, "out")?;
            fs::write(&out, traj.to_json()?)?;
            info!(
                "wrote {} trajectory points to {}",
                traj.len(),
                out.display()
            );
        }
        Command::Dataset { seed, count, out } => {
            let mut cfg = DatasetConfig {
                seed: s.seed(seed)?,
                ..DatasetConfig::default()
            };
            if let Some(c) = s.opt(count, "count")? {
                cfg.count = c;
            }
            if let Some(g) = s.section("gen")? {
                cfg.gen = g;
            }
            if let Some(g) = s.section("sim")? {
                cfg.sim = g;
            }
            let ds = build_dataset(&cfg)?;
            let out = s.path(out, "out")?;
            write_dataset(&ds, &cfg, &out)?;
            println!(
                "dataset: {} train, {} val, {} test, {} skipped -> {}",
                ds.train.len(),
                ds.val.len(),
                ds.test.len(),
                ds.skipped,
                out.display()
            );
        }
        Command::Train {
            stage,
            data,
            models,
            seed,
            epochs,
        } => {
            let stage = match stage {
                Some(st) => st,
                None => match s.get::<String>("stage")?.as_deref() {
                    Some("1") => Stage::Interior,
                    Some("2") => Stage::Doors,
                    Some("3") => Stage::Furniture,
                    Some("all") | None => Stage::All,
                    Some(other) => return Err(Error::Config(format!("unknown stage {other:?}"))),
                },
            };
            let mut cfg: CascadeTrainConfig = s.section("train")?.unwrap_or_default();
            cfg.set_seed(s.seed(seed)?);
            if let Some(e) = s.opt(epochs, "epochs")? {
                cfg.interior_train.epochs = e;
                cfg.door_train.epochs = e;
                cfg.furniture_train.epochs = e;
            }
            let (ds, _) = read_dataset(s.path(data, "data")?)?;
            let dir = s.path(models, "models")?;
            let existing = Models::load(&dir).ok();
            let (interior, doors, furniture) = match (stage, existing) {
                (Stage::All, _) => (None, None, None),
                (_, Some(m)) => (Some(m.interior), Some(m.doors), Some(m.furniture)),
                (_, None) => (None, None, None),
            };
            let want = |st: Stage| stage == Stage::All || stage == st;
            let interior = match interior.filter(|_| !want(Stage::Interior)) {
                Some(m) => m,
                None => train_interior(&ds.train, &ds.val, &cfg)?.0,
            };
            let doors = match doors.filter(|_| !want(Stage::Doors)) {
                Some(m) => m,
                None => train_doors(&ds.train, &ds.val, &cfg, Some(&interior))?.0,
            };
            let furniture = match furniture.filter(|_| !want(Stage::Furniture)) {
                Some(m) => m,
                None => train_furniture(&ds.train, &ds.val, &cfg)?.0,
            };
            Models {
                interior,
                doors,
                furniture,
            }
            .save(&dir)?;
            println!("models written to {}", dir.display());
        }
        Command::Infer {
            models,
            traj,
            data,
            split,
            out,
            mrf,
        } => {
            let models = Models::load(s.path(models, "models")?)?;
            let cfg = mrf_config(&mrf, &s)?;
            let out = s.path(out, "out")?;
            let grid = s.section("grid")?.unwrap_or_default();
            match (s.opt(traj, "traj")?, s.opt(data, "data")?) {
                (Some(t), None) => {
                    let traj = Trajectory::from_json(&fs::read_to_string(t)?)?;
                    run_cascade(&traj, &models, grid, &cfg)?.save(&out)?;
                }
                (None, Some(d)) => {
                    let (ds, _) = read_dataset(d)?;
                    let split = s.opt(split, "split")?.unwrap_or_else(|| "test".into());
                    let samples = match split.as_str() {
                        "train" => &ds.train,
                        "val" => &ds.val,
                        "test" => &ds.test,
                        other => return Err(Error::Config(format!("unknown split {other:?}"))),
                    };
                    fs::create_dir_all(&out)?;
                    let mut failed = 0;
                    for sample in samples {
                        match run_cascade(&sample.traj, &models, sample.room.grid(), &cfg) {
                            Ok(plan) => plan.save(out.join(format!("{}.json", sample.id)))?,
                            Err(e) => {
                                log::warn!("{}: {e}", sample.id);
                                failed += 1;
                            }
                        }
                    }
                    println!(
                        "{} plans written to {}, {failed} failed",
                        samples.len() - failed,
                        out.display()
                    );
                }
                _ => {
                    return Err(Error::Config(
                        "give exactly one of --traj and --data".into(),
                    ))
                }
            }
        }
        Command::Eval {
            pred,
            gt,
            report,
            align,
        } => {
            let pred = s.path(pred, "pred")?;
            let gt = s.path(gt, "gt")?;
            let rooms: Vec<(String, Dfpg)> = if gt.join("manifest.json").exists() {
                read_dataset(&gt)?
                    .0
                    .all()
                    .map(|x| (x.id.clone(), x.room.clone()))
                    .collect()
            } else {
                json_files(&gt)?
                    .into_iter()
                    .map(|p| Ok((stem(&p), Dfpg::from_json(&fs::read_to_string(&p)?)?)))
                    .collect::<Result<_>>()?
            };
            let mut samples: Vec<SampleEval> = Vec::new();
            for p in json_files(&pred)? {
                let id = stem(&p);
                let Some((_, room)) = rooms.iter().find(|(r, _)| *r == id) else {
                    log::warn!("no ground truth for {id}");
                    continue;
                };
                let mut plan = FloorPlan::load(&p)?;
                if align || s.get::<bool>("align")?.unwrap_or(false) {
                    plan = align_by_bbox(&plan, room)?;
                }
                samples.push(evaluate_plan(&id, &plan, room)?);
            }
            let r = EvalReport::from_samples(samples);
            println!(
                "{} samples: interior F1 {:.3}, doors F1 {:.3}, furniture F1 {:.3}",
                r.samples.len(),
                r.interior.f1,
                r.doors.f1,
                r.furniture.f1
            );
            if let Some(path) = s.opt::<PathBuf>(report, "report")? {
                write_json(&path, &r)?;
            }
        }
        Command::Render {
            plan,
            room,
            traj,
            out,
        } => {
            let plan = match (s.opt(plan, "plan")?, s.opt(room, "room")?) {
                (Some(p), None) => FloorPlan::load(p)?,
                (None, Some(r)) => {
                    FloorPlan::from_dfpg(&Dfpg::from_json(&fs::read_to_string(r)?)?)?
                }
                _ => {
                    return Err(Error::Config(
                        "give exactly one of --plan and --room".into(),
                    ))
                }
            };
            let traj = match s.opt(traj, "traj")? {
                Some(t) => Some(Trajectory::from_json(&fs::read_to_string(t)?)?),
                None => None,
            };
            fs::write(s.path(out, "out")?, render_svg(&plan, traj.as_ref())?)?;
        }
        Command::Repro {
            seed,
            count,
            report,
        } => {
            let mut cfg = SuiteConfig::with_seed(s.seed(seed)?);
            if let Some(c) = s.opt(count, "count")? {
                cfg.experiment.dataset.count = c;
            }
            if let Some(t) = s.section("train")? {
                cfg.experiment.train = t;
                cfg.experiment.train.set_seed(cfg.seed);
            }
            let (results, exp) = run_suite(&cfg, |r| println!("{r}"))?;
            let passed = results.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", results.len());
            if let Some(path) = s.opt(report, "report")? {
                write_json(&path, &exp.report)?;
            }
            if passed != results.len() {
                return Err(Error::Config("acceptance suite failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
