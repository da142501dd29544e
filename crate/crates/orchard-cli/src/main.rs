//! Command-line front end for the orchard tree-delineation pipeline.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use orchard::calibrate::{derive_calibration, Calibration, CalibrationInput};
use orchard::config::PipelineConfig;
use orchard::evaluate::read_gt_apples;
use orchard::pipeline::{run_pipeline, GtSidecars, PipelineInputs, RunOptions, Stage};
use orchard::ply::{read_ply, write_ply};
use orchard::synth::{generate_scene, SceneSpec};

#[derive(Parser)]
#[command(
    name = "orchard",
    about = "Delineate individual apple trees in trellis-orchard point clouds \
             and assign detected apples to their bearing trees.",
    after_help = "Set ORCHARD_LOG=1 for verbose progress output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Winter (leaf-off) point cloud, PLY.
    #[arg(long)]
    winter: Option<PathBuf>,
    /// Harvest (fruiting-season) point cloud, PLY.
    #[arg(long)]
    harvest: Option<PathBuf>,
    /// Calibration sidecar JSON (marker observation or explicit transform).
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Ground-truth labels: PLY with per-vertex semlabel/treeid scalars.
    #[arg(long)]
    gt_labels: Option<PathBuf>,
    /// Ground-truth apples: JSON [{x,y,z,tree_id}].
    #[arg(long)]
    gt_apples: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override (flags > config file > defaults).
    #[arg(long)]
    seed: Option<u64>,
    /// Key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stop after this stage (calibrate|segment|separate|apples|register|assign|eval).
    #[arg(long)]
    stage: Option<String>,
    /// Worker thread cap.
    #[arg(long)]
    workers: Option<usize>,
    /// Emit intermediate debug artifacts (projection/accumulator images).
    #[arg(long, default_value_t = false)]
    emit_debug: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated scene.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 5)]
    trees: usize,
    #[arg(long, default_value_t = 12)]
    apples_per_tree: usize,
    #[arg(long, default_value_t = 0.002)]
    noise: f64,
    #[arg(long, default_value_t = 0.04)]
    droop: f64,
    /// Include a support pole (true/false).
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    pole: bool,
    /// Emit the clouds in the raw (pre-calibration) frame with a
    /// calibration sidecar; with false, clouds are already calibrated.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    raw: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate and crop the input clouds, then stop.
    Calibrate(CommonArgs),
    /// Run through semantic segmentation of the winter cloud.
    Segment(CommonArgs),
    /// Run through individual-tree separation.
    Separate(CommonArgs),
    /// Run through apple detection on the harvest cloud.
    Apples(CommonArgs),
    /// Run through winter→harvest ICP registration.
    Register(CommonArgs),
    /// Run through apple-to-tree assignment.
    Assign(CommonArgs),
    /// Run everything and evaluate against ground truth.
    Eval(CommonArgs),
    /// Full pipeline (same as eval; evaluation is skipped without GT).
    Run(CommonArgs),
    /// Generate a synthetic winter/harvest scene pair with ground truth.
    Synth(SynthArgs),
}

fn load_config(args: &CommonArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            PipelineConfig::from_kv_text(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_calibration(path: &PathBuf) -> anyhow::Result<Calibration> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading calibration {}", path.display()))?;
    let input: CalibrationInput =
        serde_json::from_str(&text).context("parsing calibration JSON")?;
    Ok(derive_calibration(&input)?)
}

fn run_stage(args: CommonArgs, default_stage: Stage) -> anyhow::Result<()> {
    if let Some(n) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let cfg = load_config(&args)?;
    let stage = match &args.stage {
        Some(s) => Stage::parse(s)?,
        None => default_stage,
    };
    let winter_path = args
        .winter
        .as_ref()
        .context("--winter is required for pipeline runs")?;
    let winter = read_ply(winter_path)?;
    let harvest = match &args.harvest {
        Some(p) => Some(read_ply(p)?.cloud),
        None => None,
    };
    let calibration = match &args.calib {
        Some(p) => Some(load_calibration(p)?),
        None => None,
    };
    let mut gt = GtSidecars::default();
    if let Some(p) = &args.gt_labels {
        let labels = read_ply(p)?;
        if labels.cloud.len() != winter.cloud.len() {
            bail!(
                "gt-labels point count {} does not match winter cloud {}",
                labels.cloud.len(),
                winter.cloud.len()
            );
        }
        gt.semlabel = labels.semlabel;
        gt.treeid = labels.treeid;
    } else {
        // The winter PLY itself may carry the sidecar scalars.
        gt.semlabel = winter.semlabel.clone();
        gt.treeid = winter.treeid.clone();
    }
    if let Some(p) = &args.gt_apples {
        gt.apples = Some(read_gt_apples(p)?);
    }
    let inputs = PipelineInputs {
        winter: winter.cloud,
        harvest,
        calibration,
        roi: cfg.roi(),
        gt,
    };
    let opts = RunOptions {
        out_dir: args.out.clone(),
        emit_debug: args.emit_debug,
        stage,
    };
    let outcome = run_pipeline(&inputs, &cfg, &opts)?;
    println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    Ok(())
}

fn run_synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SceneSpec {
        n_trees: args.trees,
        apples_per_tree: args.apples_per_tree,
        noise_sigma: args.noise,
        droop: args.droop,
        pole: args.pole,
        seed: args.seed.unwrap_or(0),
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let (winter, harvest) = if args.raw {
        (scene.to_raw(&scene.winter), scene.to_raw(&scene.harvest))
    } else {
        (scene.winter.clone(), scene.harvest.clone())
    };
    let w_sem: Vec<i32> = scene.winter_gt.semlabel.iter().map(|l| l.code()).collect();
    let w_tid: Vec<i32> = scene.winter_gt.treeid.iter().map(|&t| t as i32).collect();
    write_ply(
        args.out.join("winter.ply"),
        &winter,
        Some(&w_sem),
        Some(&w_tid),
        false,
    )?;
    let h_sem: Vec<i32> = scene.harvest_gt.semlabel.iter().map(|l| l.code()).collect();
    let h_tid: Vec<i32> = scene.harvest_gt.treeid.iter().map(|&t| t as i32).collect();
    write_ply(
        args.out.join("harvest.ply"),
        &harvest,
        Some(&h_sem),
        Some(&h_tid),
        false,
    )?;
    orchard::evaluate::write_gt_apples(args.out.join("gt_apples.json"), &scene.apples)?;
    if args.raw {
        let r = scene.calibration.rotation;
        let calib = serde_json::json!({
            "scale": scene.calibration.scale,
            "rotation": [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            "origin": [
                scene.calibration.origin.x,
                scene.calibration.origin.y,
                scene.calibration.origin.z,
            ],
        });
        std::fs::write(
            args.out.join("calib.json"),
            serde_json::to_string_pretty(&calib)?,
        )?;
    }
    println!(
        "{}",
        serde_json::json!({
            "schema": "v1",
            "out": args.out,
            "winter_points": winter.len(),
            "harvest_points": harvest.len(),
            "trees": spec.n_trees,
            "apples": scene.apples.len(),
            "raw_frame": args.raw,
        })
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => run_stage(a, Stage::Calibrate),
        Command::Segment(a) => run_stage(a, Stage::Segment),
        Command::Separate(a) => run_stage(a, Stage::Separate),
        Command::Apples(a) => run_stage(a, Stage::Apples),
        Command::Register(a) => run_stage(a, Stage::Register),
        Command::Assign(a) => run_stage(a, Stage::Assign),
        Command::Eval(a) | Command::Run(a) => run_stage(a, Stage::Eval),
        Command::Synth(a) => run_synth(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
