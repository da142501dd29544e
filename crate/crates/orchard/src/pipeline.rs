//! End-to-end orchestration: calibrate → segment → separate → detect apples
//! → register → assign → evaluate, with artifact emission and a versioned
//! run report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apples::{detect_apples, DetectedApple};
use crate::calibrate::{apply_calibration_indexed, Calibration, RoiSpec};
use crate::cloud::ColorPointCloud;
use crate::config::PipelineConfig;
use crate::error::{OrchardError, Result};
use crate::evaluate::{
    assignment_accuracy, match_apples, segmentation_metrics, AppleMatch, ClassMetrics, GtApple,
    MetricValue,
};
use crate::pgm;
use crate::register::{assign_apples, icp_align, AppleAssignment, RigidTransform};
use crate::segment::{segment_winter, SegmentResult, SemanticLabel};
use crate::separate::{separate_trees, SeparationResult};
use crate::skeleton::skeletonize;
use crate::voxel::voxelize;

/// How far through the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Calibrate,
    Segment,
    Separate,
    Apples,
    Register,
    Assign,
    Eval,
}

impl Stage {
    pub fn parse(s: &str) -> Result<Stage> {
        Ok(match s {
            "calibrate" => Stage::Calibrate,
            "segment" => Stage::Segment,
            "separate" => Stage::Separate,
            "apples" => Stage::Apples,
            "register" => Stage::Register,
            "assign" => Stage::Assign,
            "eval" => Stage::Eval,
            other => {
                return Err(OrchardError::ConfigError(format!(
                    "unknown stage '{other}'"
                )))
            }
        })
    }
}

/// Per-point ground truth aligned with the (raw) winter input.
#[derive(Debug, Clone, Default)]
pub struct GtSidecars {
    pub semlabel: Option<Vec<i32>>,
    pub treeid: Option<Vec<i32>>,
    pub apples: Option<Vec<GtApple>>,
}

/// In-memory pipeline inputs. Clouds are raw when a calibration is given,
/// otherwise they are taken as already calibrated.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub winter: ColorPointCloud,
    pub harvest: Option<ColorPointCloud>,
    pub calibration: Option<Calibration>,
    pub roi: RoiSpec,
    pub gt: GtSidecars,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub emit_debug: bool,
    pub stage: Stage,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            emit_debug: false,
            stage: Stage::Eval,
        }
    }
}

/// Apple detection/assignment evaluation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppleEval {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub acc: MetricValue,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub classes: BTreeMap<String, ClassMetrics>,
    /// Fraction of GT tree-labeled points carrying the correct tree id.
    pub tree_id_accuracy: Option<f64>,
    pub apples: Option<AppleEval>,
}

/// Versioned, serializable run summary. `timings_ms` is excluded from the
/// comparable section used for determinism checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub seed: u64,
    pub n_points_winter: usize,
    pub n_points_harvest: usize,
    pub n_trees: usize,
    pub tree_summary: Vec<TreeSummary>,
    pub n_poles: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub n_apples_detected: usize,
    pub transform: Option<RigidTransform>,
    pub metrics: Option<EvalReport>,
    pub error: Option<String>,
    pub timings_ms: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeSummary {
    pub id: u32,
    pub base_y: f64,
    pub height: f64,
    pub point_count: usize,
}

impl RunReport {
    /// JSON of everything except timings, for byte-identical comparisons.
    pub fn comparable_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings_ms.clear();
        serde_json::to_string_pretty(&copy).expect("serializable")
    }
}

/// Everything a run produced, for programmatic consumers.
pub struct RunOutcome {
    pub report: RunReport,
    pub winter_cal: ColorPointCloud,
    pub harvest_cal: Option<ColorPointCloud>,
    pub segmentation: Option<SegmentResult>,
    pub separation: Option<SeparationResult>,
    pub detections: Vec<DetectedApple>,
    pub transform: Option<RigidTransform>,
    pub assignments: Vec<AppleAssignment>,
    pub matches: Option<AppleMatch>,
    /// GT sidecars cropped to the calibrated winter cloud.
    pub gt_semlabel: Option<Vec<SemanticLabel>>,
    pub gt_treeid: Option<Vec<u32>>,
}

fn crop_gt<T: Copy>(values: &Option<Vec<T>>, kept: &[usize]) -> Option<Vec<T>> {
    values
        .as_ref()
        .map(|v| kept.iter().map(|&i| v[i]).collect())
}

/// Execute the pipeline up to `opts.stage`; emits artifacts into
/// `opts.out_dir` when given.
pub fn run_pipeline(
    inputs: &PipelineInputs,
    cfg: &PipelineConfig,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut timings: BTreeMap<String, u64> = BTreeMap::new();
    let mut time = |name: &str, start: Instant, timings: &mut BTreeMap<String, u64>| {
        timings.insert(name.to_string(), start.elapsed().as_millis() as u64);
    };
    let _ = &mut time;

    // Stage: calibrate (or pass-through when clouds are pre-calibrated).
    let t0 = Instant::now();
    let (winter_cal, kept_w) = match &inputs.calibration {
        Some(c) => apply_calibration_indexed(&inputs.winter, c, &inputs.roi)?,
        None => (
            inputs.winter.clone(),
            (0..inputs.winter.len()).collect::<Vec<_>>(),
        ),
    };
    let harvest_cal = match (&inputs.harvest, &inputs.calibration) {
        (Some(h), Some(c)) => Some(apply_calibration_indexed(h, c, &inputs.roi)?.0),
        (Some(h), None) => Some(h.clone()),
        (None, _) => None,
    };
    timings.insert("calibrate".into(), t0.elapsed().as_millis() as u64);

    let gt_semlabel_i = crop_gt(&inputs.gt.semlabel, &kept_w);
    let gt_treeid_i = crop_gt(&inputs.gt.treeid, &kept_w);
    let gt_semlabel: Option<Vec<SemanticLabel>> = match &gt_semlabel_i {
        Some(codes) => {
            let mut out = Vec::with_capacity(codes.len());
            for &c in codes {
                out.push(SemanticLabel::from_code(c).ok_or_else(|| OrchardError::ParseError {
                    location: "semlabel sidecar".into(),
                    message: format!("unknown label code {c}"),
                })?);
            }
            Some(out)
        }
        None => None,
    };
    let gt_treeid: Option<Vec<u32>> = gt_treeid_i.map(|v| v.iter().map(|&t| t.max(0) as u32).collect());

    let mut report = RunReport {
        schema: "v1".into(),
        seed: cfg.seed,
        n_points_winter: winter_cal.len(),
        n_points_harvest: harvest_cal.as_ref().map_or(0, |h| h.len()),
        n_trees: 0,
        tree_summary: Vec::new(),
        n_poles: 0,
        label_counts: BTreeMap::new(),
        n_apples_detected: 0,
        transform: None,
        metrics: None,
        error: None,
        timings_ms: BTreeMap::new(),
    };

    let mut outcome = RunOutcome {
        report: RunReport {
            timings_ms: BTreeMap::new(),
            ..report.clone()
        },
        winter_cal: winter_cal.clone(),
        harvest_cal: harvest_cal.clone(),
        segmentation: None,
        separation: None,
        detections: Vec::new(),
        transform: None,
        assignments: Vec::new(),
        matches: None,
        gt_semlabel: gt_semlabel.clone(),
        gt_treeid: gt_treeid.clone(),
    };

    if opts.stage < Stage::Segment {
        finish(&mut report, timings, opts)?;
        outcome.report = report;
        return Ok(outcome);
    }

    // Stage: segment.
    let t = Instant::now();
    let seg = segment_winter(&winter_cal, cfg)?;
    timings.insert("segment".into(), t.elapsed().as_millis() as u64);
    report.n_trees = seg.trees.trees.len();
    report.n_poles = seg.poles.len();
    for label in &seg.labeling {
        *report
            .label_counts
            .entry(format!("{label:?}"))
            .or_insert(0) += 1;
    }
    if let Some(dir) = &opts.out_dir {
        emit_segment_artifacts(dir, &seg, cfg, opts.emit_debug)?;
    }

    if opts.stage < Stage::Separate {
        outcome.segmentation = Some(seg);
        finish(&mut report, timings, opts)?;
        outcome.report = report;
        return Ok(outcome);
    }

    // Stage: separate.
    let t = Instant::now();
    let sep = separate_trees(&seg, cfg)?;
    timings.insert("separate".into(), t.elapsed().as_millis() as u64);
    report.tree_summary = seg
        .trees
        .trees
        .iter()
        .map(|tr| TreeSummary {
            id: tr.id,
            base_y: tr.base_y,
            height: tr.top_z(),
            point_count: sep
                .tp_tree_ids
                .iter()
                .filter(|&&t| t == Some(tr.id))
                .count(),
        })
        .collect();
    if let Some(dir) = &opts.out_dir {
        emit_separate_artifacts(dir, &seg, &sep)?;
    }

    // Stage: apples.
    let mut detections = Vec::new();
    if opts.stage >= Stage::Apples {
        if let Some(h) = &harvest_cal {
            let t = Instant::now();
            detections = detect_apples(h, cfg)?;
            timings.insert("apples".into(), t.elapsed().as_millis() as u64);
            report.n_apples_detected = detections.len();
            if let Some(dir) = &opts.out_dir {
                emit_apple_artifacts(dir, &detections)?;
            }
        }
    }

    // Stage: register.
    let mut transform = None;
    if opts.stage >= Stage::Register {
        if let Some(h) = &harvest_cal {
            let t = Instant::now();
            let labeled_pts: Vec<nalgebra::Point3<f64>> = sep
                .labeled
                .labeled_indices()
                .iter()
                .map(|&i| sep.labeled.cloud.points[i])
                .collect();
            let tf = icp_align(&labeled_pts, &h.points, cfg)?;
            timings.insert("register".into(), t.elapsed().as_millis() as u64);
            if let Some(dir) = &opts.out_dir {
                std::fs::create_dir_all(dir)?;
                let json = serde_json::json!({
                    "schema": "v1",
                    "R": tf.rotation,
                    "T": tf.translation,
                    "rms": tf.fitness,
                });
                std::fs::write(dir.join("transform.json"), serde_json::to_string_pretty(&json).unwrap())?;
            }
            report.transform = Some(tf.clone());
            transform = Some(tf);
        }
    }

    // Stage: assign.
    let mut assignments = Vec::new();
    if opts.stage >= Stage::Assign && !detections.is_empty() {
        let tf = transform.clone().unwrap_or_else(RigidTransform::identity);
        let t = Instant::now();
        assignments = assign_apples(&detections, &sep.labeled, &tf)?;
        timings.insert("assign".into(), t.elapsed().as_millis() as u64);
        if let Some(dir) = &opts.out_dir {
            emit_assignment_csv(dir, &detections, &assignments)?;
        }
    }

    // Stage: eval (only when ground truth is present).
    let mut matches = None;
    if opts.stage >= Stage::Eval {
        let t = Instant::now();
        let mut eval = EvalReport::default();
        let mut have_any = false;
        if let Some(gt) = &gt_semlabel {
            have_any = true;
            for class in [
                SemanticLabel::TreeTrunk,
                SemanticLabel::Branch,
                SemanticLabel::TrellisWireWaterPipe,
                SemanticLabel::SupportPole,
            ] {
                let m = segmentation_metrics(&seg.labeling, gt, class)?;
                eval.classes.insert(format!("{class:?}"), m);
            }
        }
        if let Some(gt_ids) = &gt_treeid {
            have_any = true;
            let mut total = 0usize;
            let mut correct = 0usize;
            for (i, &gid) in gt_ids.iter().enumerate() {
                if gid == 0 {
                    continue;
                }
                total += 1;
                if sep.tp_tree_ids[i] == Some(gid) {
                    correct += 1;
                }
            }
            if total > 0 {
                eval.tree_id_accuracy = Some(correct as f64 / total as f64);
            }
        }
        if let Some(gt_apples) = &inputs.gt.apples {
            have_any = true;
            let det_pts: Vec<nalgebra::Point3<f64>> =
                detections.iter().map(|d| d.point()).collect();
            let gt_pts: Vec<nalgebra::Point3<f64>> =
                gt_apples.iter().map(|g| g.point()).collect();
            let m = match_apples(&det_pts, &gt_pts, cfg.match_radius);
            let pred_tree: Vec<u32> = detections
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    assignments
                        .iter()
                        .find(|a| a.apple_index == i)
                        .map(|a| a.tree_id)
                        .unwrap_or(0)
                })
                .collect();
            let gt_tree: Vec<u32> = gt_apples.iter().map(|g| g.tree_id).collect();
            let acc = assignment_accuracy(&m, &pred_tree, &gt_tree);
            eval.apples = Some(AppleEval {
                tp: m.tp,
                fp: m.fp,
                fn_: m.fn_,
                precision: MetricValue::ratio(m.tp as f64, (m.tp + m.fp) as f64),
                recall: MetricValue::ratio(m.tp as f64, (m.tp + m.fn_) as f64),
                acc,
            });
            matches = Some(m);
        }
        if have_any {
            timings.insert("eval".into(), t.elapsed().as_millis() as u64);
            report.metrics = Some(eval);
        }
    }

    outcome.segmentation = Some(seg);
    outcome.separation = Some(sep);
    outcome.detections = detections;
    outcome.transform = transform;
    outcome.assignments = assignments;
    outcome.matches = matches;
    finish(&mut report, timings, opts)?;
    outcome.report = report;
    Ok(outcome)
}

fn finish(
    report: &mut RunReport,
    timings: BTreeMap<String, u64>,
    opts: &RunOptions,
) -> Result<()> {
    report.timings_ms = timings;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(report).expect("serializable"),
        )?;
        std::fs::write(dir.join("report.md"), report_markdown(report))?;
    }
    Ok(())
}

fn fmt_metric(m: &MetricValue) -> String {
    match m.value() {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "n/a".into(),
    }
}

/// Markdown table mirroring the per-class metric layout.
pub fn report_markdown(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str("# Run report\n\n");
    s.push_str(&format!(
        "Trees: {}  Poles: {}  Apples detected: {}\n\n",
        report.n_trees, report.n_poles, report.n_apples_detected
    ));
    if let Some(eval) = &report.metrics {
        if !eval.classes.is_empty() {
            s.push_str("| Class | Re | Pr | F1 | IoU | CA |\n");
            s.push_str("|---|---|---|---|---|---|\n");
            for (name, m) in &eval.classes {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    name,
                    fmt_metric(&m.recall),
                    fmt_metric(&m.precision),
                    fmt_metric(&m.f1),
                    fmt_metric(&m.iou),
                    fmt_metric(&m.class_accuracy),
                ));
            }
            s.push('\n');
        }
        if let Some(a) = &eval.apples {
            s.push_str(&format!(
                "Apples: TP={} FP={} FN={} Pr={} Re={} ACC={}\n",
                a.tp,
                a.fp,
                a.fn_,
                fmt_metric(&a.precision),
                fmt_metric(&a.recall),
                fmt_metric(&a.acc),
            ));
        }
        if let Some(t) = eval.tree_id_accuracy {
            s.push_str(&format!("Tree-id point accuracy: {:.2}%\n", t * 100.0));
        }
    }
    s
}

fn emit_segment_artifacts(
    dir: &Path,
    seg: &SegmentResult,
    cfg: &PipelineConfig,
    emit_debug: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let labels: Vec<i32> = seg.labeling.iter().map(|l| l.code()).collect();
    crate::ply::write_ply(
        dir.join("labeled.ply"),
        &seg.tp_cloud,
        Some(&labels),
        None,
        false,
    )?;
    if emit_debug {
        // YZ skeleton projection and Hough accumulator.
        let grid = voxelize(&seg.tp_cloud, cfg.voxel_edge)?;
        let sk = skeletonize(&grid)?;
        let mut pixels: Vec<(i32, i32)> = sk.voxels.iter().map(|v| (v[1], v[2])).collect();
        pixels.sort_unstable();
        pixels.dedup();
        let w = grid.dims[1];
        let h = grid.dims[2];
        let mut img = vec![0u8; w * h];
        for (y, z) in &pixels {
            let row = h - 1 - *z as usize;
            img[row * w + *y as usize] = 255;
        }
        pgm::write_pgm(dir.join("yz_projection.pgm"), w, h, &img)?;
        let (acc, n_theta, n_rho, _) = crate::hough::accumulate(&pixels, cfg.hough_theta_step_deg);
        let bytes = pgm::normalize_counts(&acc);
        pgm::write_pgm(dir.join("hough_accumulator.pgm"), n_theta, n_rho, &bytes)?;
    }
    Ok(())
}

fn emit_separate_artifacts(dir: &Path, seg: &SegmentResult, sep: &SeparationResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let ids: Vec<i32> = sep
        .labeled
        .tree_ids
        .iter()
        .map(|t| t.map(|v| v as i32).unwrap_or(0))
        .collect();
    crate::ply::write_ply(
        dir.join("trees.ply"),
        &sep.labeled.cloud,
        None,
        Some(&ids),
        false,
    )?;
    let summary: Vec<serde_json::Value> = seg
        .trees
        .trees
        .iter()
        .map(|t| {
            serde_json::json!({
                "id": t.id,
                "base": [0.0, t.base_y, 0.0],
                "height": t.top_z(),
                "points": sep.tp_tree_ids.iter().filter(|&&x| x == Some(t.id)).count(),
            })
        })
        .collect();
    let doc = serde_json::json!({"schema": "v1", "trees": summary});
    std::fs::write(
        dir.join("tree_summary.json"),
        serde_json::to_string_pretty(&doc).unwrap(),
    )?;
    Ok(())
}

fn emit_apple_artifacts(dir: &Path, detections: &[DetectedApple]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let entries: Vec<serde_json::Value> = detections
        .iter()
        .map(|d| {
            serde_json::json!({
                "x": d.location[0],
                "y": d.location[1],
                "z": d.location[2],
                "range": format!("{:?}", d.variety),
                "voxels": d.voxel_count,
            })
        })
        .collect();
    let doc = serde_json::json!({"schema": "v1", "detections": entries});
    std::fs::write(
        dir.join("detections.json"),
        serde_json::to_string_pretty(&doc).unwrap(),
    )?;
    // Overlay: detection centers as bright magenta points.
    let overlay = ColorPointCloud {
        points: detections.iter().map(|d| d.point()).collect(),
        colors: vec![[255, 0, 255]; detections.len()],
    };
    if !overlay.points.is_empty() {
        crate::ply::write_ply(dir.join("apples_overlay.ply"), &overlay, None, None, false)?;
    }
    Ok(())
}

fn emit_assignment_csv(
    dir: &Path,
    detections: &[DetectedApple],
    assignments: &[AppleAssignment],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("assignments.csv"))?;
    writeln!(f, "apple_id,x,y,z,tree_id,nn_distance_m")?;
    for a in assignments {
        let d = &detections[a.apple_index];
        writeln!(
            f,
            "{},{},{},{},{},{}",
            a.apple_index, d.location[0], d.location[1], d.location[2], a.tree_id, a.distance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, SceneSpec};

    fn roi() -> RoiSpec {
        RoiSpec {
            half_extent: 4.0,
            depth: 0.6,
            height: 3.0,
        }
    }

    fn scene_inputs(scene: &crate::synth::SyntheticScene) -> PipelineInputs {
        PipelineInputs {
            winter: scene.winter.clone(),
            harvest: Some(scene.harvest.clone()),
            calibration: None,
            roi: roi(),
            gt: GtSidecars {
                semlabel: Some(scene.winter_gt.semlabel.iter().map(|l| l.code()).collect()),
                treeid: Some(scene.winter_gt.treeid.iter().map(|&t| t as i32).collect()),
                apples: Some(scene.apples.clone()),
            },
        }
    }

    /// One full end-to-end run on a small synthetic scene: correct tree
    /// count, populated ACC, artifacts on disk.
    #[test]
    fn end_to_end_synthetic_scene() {
        let spec = SceneSpec {
            n_trees: 4,
            apples_per_tree: 6,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let inputs = scene_inputs(&scene);
        let cfg = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            emit_debug: true,
            stage: Stage::Eval,
        };
        let out = run_pipeline(&inputs, &cfg, &opts).unwrap();
        assert_eq!(out.report.n_trees, 4, "tree count");
        let eval = out.report.metrics.as_ref().unwrap();
        let apples = eval.apples.as_ref().unwrap();
        assert!(apples.tp > 0);
        assert!(apples.acc.value().is_some());
        for name in [
            "report.json",
            "report.md",
            "labeled.ply",
            "trees.ply",
            "tree_summary.json",
            "detections.json",
            "transform.json",
            "assignments.csv",
            "yz_projection.pgm",
            "hough_accumulator.pgm",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
    }

    #[test]
    fn winter_only_stops_after_separation() {
        let spec = SceneSpec {
            n_trees: 2,
            apples_per_tree: 0,
            spanning_bridges: 0,
            floating_twigs: 0,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let inputs = PipelineInputs {
            winter: scene.winter.clone(),
            harvest: None,
            calibration: None,
            roi: roi(),
            gt: GtSidecars::default(),
        };
        let cfg = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            emit_debug: false,
            stage: Stage::Separate,
        };
        let out = run_pipeline(&inputs, &cfg, &opts).unwrap();
        assert_eq!(out.report.n_trees, 2);
        assert!(out.detections.is_empty());
        assert!(out.transform.is_none());
        assert!(dir.path().join("trees.ply").exists());
    }

    #[test]
    fn comparable_report_sections_are_byte_identical() {
        let spec = SceneSpec {
            n_trees: 2,
            apples_per_tree: 3,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let inputs = scene_inputs(&scene);
        let cfg = PipelineConfig::default();
        let opts = RunOptions::default();
        let a = run_pipeline(&inputs, &cfg, &opts).unwrap();
        let b = run_pipeline(&inputs, &cfg, &opts).unwrap();
        assert_eq!(a.report.comparable_json(), b.report.comparable_json());
    }
}
