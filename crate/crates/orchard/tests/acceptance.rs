//! Acceptance gate: one test per release criterion, each ending in a single
//! pass/fail line. Run with `cargo test --test acceptance`.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orchard::apples::{hue_window, rgb_to_hsv, VarietyHint};
use orchard::cloud::{point_line_distance, ColorPointCloud, Line3};
use orchard::config::PipelineConfig;
use orchard::evaluate::{assignment_accuracy, match_apples, metrics_from_pr};
use orchard::knn::KdTree;
use orchard::pipeline::{run_pipeline, GtSidecars, PipelineInputs, RunOptions, Stage};
use orchard::register::{assign_apples, icp_align};
use orchard::segment::segment_winter;
use orchard::separate::{assign_components, split_spanning, ComponentStatus, TreeLabeledCloud};
use orchard::skeleton::skeletonize;
use orchard::synth::{generate_scene, SceneSpec, SyntheticScene};
use orchard::voxel::{connected_components, shortest_path, voxelize, Voxel, NEIGHBORS_26};

fn roi() -> orchard::calibrate::RoiSpec {
    PipelineConfig::default().roi()
}

fn inputs_from(scene: &SyntheticScene) -> PipelineInputs {
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

fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion}: FAIL — {detail}");
}

/// 1. Trunk-count exactness over 20 seeded scenes and runtime at ~1M points.
#[test]
fn criterion_1_trunk_count_and_runtime() {
    let mut exact = 0usize;
    for k in 0..20u64 {
        let spec = SceneSpec {
            n_trees: 4 + (k as usize % 2),
            apples_per_tree: 0,
            seed: 1000 + k,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let inputs = inputs_from(&scene);
        let opts = RunOptions {
            stage: Stage::Segment,
            ..RunOptions::default()
        };
        let out = run_pipeline(&inputs, &PipelineConfig::default(), &opts).unwrap();
        if out.report.n_trees == spec.n_trees {
            exact += 1;
        }
    }

    // Runtime bound at roughly one million winter points.
    let big = SceneSpec {
        n_trees: 4,
        apples_per_tree: 0,
        point_step: 0.0019,
        seed: 77,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&big).unwrap();
    let n_points = scene.winter.len();
    let inputs = inputs_from(&scene);
    let opts = RunOptions {
        stage: Stage::Separate,
        ..RunOptions::default()
    };
    let t0 = Instant::now();
    let out = run_pipeline(&inputs, &PipelineConfig::default(), &opts).unwrap();
    let secs = t0.elapsed().as_secs_f64();

    let ok = exact == 20 && n_points >= 900_000 && out.report.n_trees == 4 && secs <= 60.0;
    verdict(
        "1 (trunk count + runtime)",
        ok,
        &format!("{exact}/20 exact counts; {n_points} pts separated in {secs:.1}s (limit 60s)"),
    );
}

/// 2. Apple-to-tree assignment accuracy at 5mm noise, and the gap between
/// automatic separation and ground-truth tree labels.
#[test]
fn criterion_2_assignment_accuracy() {
    let cfg = PipelineConfig::default();
    let mut acc_auto = Vec::new();
    let mut acc_gt = Vec::new();
    for k in 0..20u64 {
        let spec = SceneSpec {
            n_trees: 4 + (k as usize % 2),
            noise_sigma: 0.005,
            droop: 0.05,
            pole: false,
            seed: 2000 + k,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let inputs = inputs_from(&scene);
        let out = run_pipeline(&inputs, &cfg, &RunOptions::default()).unwrap();
        let apples = out
            .report
            .metrics
            .as_ref()
            .and_then(|m| m.apples.as_ref())
            .expect("apple eval present");
        if let Some(a) = apples.acc.value() {
            acc_auto.push(a);
        }

        // Same detections and matching, but tree identities taken straight
        // from ground truth instead of the automatic separation.
        let gt_ids = out.gt_treeid.as_ref().unwrap();
        let gt_labeled = TreeLabeledCloud {
            cloud: out.winter_cal.clone(),
            tree_ids: gt_ids
                .iter()
                .map(|&t| if t > 0 { Some(t) } else { None })
                .collect(),
        };
        let src: Vec<Point3<f64>> = gt_labeled
            .labeled_indices()
            .iter()
            .map(|&i| gt_labeled.cloud.points[i])
            .collect();
        let tf = icp_align(&src, &out.harvest_cal.as_ref().unwrap().points, &cfg).unwrap();
        let assignments = assign_apples(&out.detections, &gt_labeled, &tf).unwrap();
        let pred: Vec<u32> = (0..out.detections.len())
            .map(|i| {
                assignments
                    .iter()
                    .find(|a| a.apple_index == i)
                    .map(|a| a.tree_id)
                    .unwrap_or(0)
            })
            .collect();
        let gt_tree: Vec<u32> = scene.apples.iter().map(|g| g.tree_id).collect();
        let m = out.matches.as_ref().unwrap();
        if let Some(a) = assignment_accuracy(m, &pred, &gt_tree).value() {
            acc_gt.push(a);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mg) = (mean(&acc_auto), mean(&acc_gt));
    let ok = acc_auto.len() == 20 && ma >= 0.95 && mg - ma <= 0.03;
    verdict(
        "2 (assignment accuracy)",
        ok,
        &format!(
            "mean ACC {:.4} over {} scenes (need >= 0.95); GT-label ACC {:.4}, drop {:.4} (limit 0.03)",
            ma,
            acc_auto.len(),
            mg,
            mg - ma
        ),
    );
}

/// 3. Metric formula fidelity against the published Scene 1 trellis numbers,
/// plus the F1/IoU identity on an emitted report.
#[test]
fn criterion_3_metric_formulas() {
    let (f1, iou) = metrics_from_pr(0.8498, 0.8161);
    let formula_ok = (f1 * 100.0 - 83.26).abs() < 0.01 && (iou * 100.0 - 71.32).abs() < 0.01;

    let scene = generate_scene(&SceneSpec {
        n_trees: 4,
        seed: 31,
        ..SceneSpec::default()
    })
    .unwrap();
    let out = run_pipeline(
        &inputs_from(&scene),
        &PipelineConfig::default(),
        &RunOptions::default(),
    )
    .unwrap();
    let mut identity_ok = true;
    let mut checked = 0usize;
    for m in out.report.metrics.as_ref().unwrap().classes.values() {
        if let (Some(f), Some(i)) = (m.f1.value(), m.iou.value()) {
            checked += 1;
            if (i - f / (2.0 - f)).abs() > 1e-9 {
                identity_ok = false;
            }
        }
    }
    let ok = formula_ok && identity_ok && checked > 0;
    verdict(
        "3 (metric fidelity)",
        ok,
        &format!(
            "F1 {:.4} / IoU {:.4} vs 83.26/71.32; IoU=F1/(2-F1) on {checked} report classes",
            f1 * 100.0,
            iou * 100.0
        ),
    );
}

/// 4. ICP recovery of random rigid perturbations under 5mm noise.
#[test]
fn criterion_4_icp_recovery() {
    let cfg = PipelineConfig::default();
    let scene = generate_scene(&SceneSpec {
        n_trees: 4,
        apples_per_tree: 0,
        noise_sigma: 0.0,
        pole: false,
        seed: 4,
        ..SceneSpec::default()
    })
    .unwrap();
    // Subsample tree points for speed; the structure still spans the row.
    let source: Vec<Point3<f64>> = scene
        .winter
        .points
        .iter()
        .step_by(7)
        .copied()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let normal = |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut good = 0usize;
    for _ in 0..50 {
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let angle = rng.gen_range(0.0..10.0f64).to_radians();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let dir = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let trans = dir * rng.gen_range(0.0..0.20);
        let target: Vec<Point3<f64>> = source
            .iter()
            .map(|p| {
                Point3::from(rot * p.coords + trans)
                    + Vector3::new(
                        normal(&mut rng) * 0.005,
                        normal(&mut rng) * 0.005,
                        normal(&mut rng) * 0.005,
                    )
            })
            .collect();
        let Ok(tf) = icp_align(&source, &target, &cfg) else {
            continue;
        };
        let rec = Matrix3::from_fn(|r, c| tf.rotation[r][c]);
        let delta = rec * rot.matrix().transpose();
        let cos = ((delta.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let rot_err_deg = cos.acos().to_degrees();
        let trans_err = (Vector3::from(tf.translation) - trans).norm();
        if rot_err_deg <= 0.5 && trans_err <= 0.01 {
            good += 1;
        }
    }
    let ok = good >= 48;
    verdict(
        "4 (ICP recovery)",
        ok,
        &format!("{good}/50 perturbations recovered within 0.5 deg / 1cm (need >= 48)"),
    );
}

/// 5. Oracle-equivalence suites, >= 100 randomized cases each.
#[test]
fn criterion_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // Voxelization vs independent per-point floor binning.
    for _ in 0..100 {
        let pts: Vec<Point3<f64>> = (0..rng.gen_range(1..300))
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                )
            })
            .collect();
        let cloud = ColorPointCloud::from_points(pts.clone());
        let g = voxelize(&cloud, 0.01).unwrap();
        let (min, _) = cloud.bounds().unwrap();
        let mut expect: HashSet<Voxel> = HashSet::new();
        for p in &pts {
            let mut v = [
                ((p.x - min.x) / 0.01).floor() as i32,
                ((p.y - min.y) / 0.01).floor() as i32,
                ((p.z - min.z) / 0.01).floor() as i32,
            ];
            for (k, d) in v.iter_mut().zip(g.dims) {
                *k = (*k).min(d as i32 - 1).max(0);
            }
            expect.insert(v);
        }
        let got: HashSet<Voxel> = g.occupied().iter().copied().collect();
        assert_eq!(got, expect, "voxelization oracle");
    }

    // Connected components vs union-find.
    for _ in 0..100 {
        let mut voxels: Vec<Voxel> = (0..rng.gen_range(1..200))
            .map(|_| {
                [
                    rng.gen_range(0..8),
                    rng.gen_range(0..8),
                    rng.gen_range(0..8),
                ]
            })
            .collect();
        voxels.sort_unstable();
        voxels.dedup();
        let comps = connected_components(&voxels);
        assert_eq!(comps.len(), union_find_count(&voxels), "component oracle");
        assert_eq!(
            comps.iter().map(|c| c.len()).sum::<usize>(),
            voxels.len(),
            "component partition"
        );
    }

    // BFS hop counts vs unit-weight Dijkstra.
    for _ in 0..100 {
        let mut blob: Vec<Voxel> = vec![[0, 0, 0]];
        let mut set: HashSet<Voxel> = blob.iter().copied().collect();
        for _ in 0..rng.gen_range(5..80) {
            let base = blob[rng.gen_range(0..blob.len())];
            let off = NEIGHBORS_26[rng.gen_range(0..26)];
            let n = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
            if set.insert(n) {
                blob.push(n);
            }
        }
        let a = blob[rng.gen_range(0..blob.len())];
        let b = blob[rng.gen_range(0..blob.len())];
        let path = shortest_path(&set, a, b).unwrap();
        assert_eq!(
            path.len() - 1,
            dijkstra_hops(&set, a, b).unwrap(),
            "shortest path oracle"
        );
    }

    // Point-line distance vs parametric minimization along the line.
    for _ in 0..120 {
        let a = Point3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let d = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if d.norm() < 1e-6 {
            continue;
        }
        let line = Line3::from_point_dir(a, nalgebra::Unit::new_normalize(d));
        let p = Point3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let got = point_line_distance(&p, &line).unwrap();
        // Golden-section minimization of |p - (a + t d̂)| over t.
        let f = |t: f64| (p - (a + line.direction().into_inner() * t)).norm();
        let (mut lo, mut hi) = (-20.0f64, 20.0f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        assert!(
            (got - f((lo + hi) / 2.0)).abs() < 1e-9,
            "point-line distance oracle: {got} vs {}",
            f((lo + hi) / 2.0)
        );
    }

    // Kd-tree nearest neighbor vs linear scan.
    let mut nn_cases = 0usize;
    for _ in 0..25 {
        let pts: Vec<Point3<f64>> = (0..rng.gen_range(1..400))
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let kd = KdTree::build(&pts);
        for _ in 0..5 {
            let q = Point3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let (_, d) = kd.nearest(&q).unwrap();
            let best = pts
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((d - best).abs() < 1e-9, "nearest neighbor oracle");
            nn_cases += 1;
        }
    }
    assert!(nn_cases >= 100);

    // Hue filter vs an independent per-point HSV scan.
    let cfg = PipelineConfig::default();
    for _ in 0..300 {
        let c = [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];
        let got = hue_window(&cfg, c);
        let (h, _, _) = independent_hsv(c);
        let expect = if (0.0..=0.05).contains(&h) || (0.95..=1.0).contains(&h) {
            Some(VarietyHint::RedRange)
        } else if (0.15..=0.20).contains(&h) {
            Some(VarietyHint::GreenYellowRange)
        } else {
            None
        };
        // Guard against boundary disagreement from the two HSV derivations.
        let (oh, _, _) = rgb_to_hsv(c);
        if (oh - h).abs() > 1e-9 {
            continue;
        }
        assert_eq!(got, expect, "hue filter oracle for {c:?} (h={h})");
    }

    // Apple matching vs exhaustive maximum matching.
    for _ in 0..100 {
        let gt: Vec<Point3<f64>> = (0..rng.gen_range(0..6))
            .map(|_| {
                Point3::new(
                    rng.gen_range(0.0..0.5),
                    rng.gen_range(0.0..0.5),
                    rng.gen_range(0.0..0.5),
                )
            })
            .collect();
        let det: Vec<Point3<f64>> = (0..rng.gen_range(0..6))
            .map(|_| {
                Point3::new(
                    rng.gen_range(0.0..0.5),
                    rng.gen_range(0.0..0.5),
                    rng.gen_range(0.0..0.5),
                )
            })
            .collect();
        let m = match_apples(&det, &gt, 0.10);
        assert!(m.tp <= exhaustive_max_matching(&det, &gt, 0.10));
        assert_eq!(m.tp + m.fp, det.len());
        assert_eq!(m.tp + m.fn_, gt.len());
        for &(d, g) in &m.pairs {
            assert!((det[d] - gt[g]).norm() <= 0.10);
        }
    }
    // Well-separated targets: mutual-nearest equals the exhaustive optimum.
    for _ in 0..100 {
        let n = rng.gen_range(1..8);
        let gt: Vec<Point3<f64>> = (0..n)
            .map(|i| Point3::new(0.0, i as f64 * 0.5, 0.0))
            .collect();
        let det: Vec<Point3<f64>> = gt
            .iter()
            .map(|p| {
                p + Vector3::new(
                    rng.gen_range(-0.03..0.03),
                    rng.gen_range(-0.03..0.03),
                    rng.gen_range(-0.03..0.03),
                )
            })
            .collect();
        let m = match_apples(&det, &gt, 0.10);
        assert_eq!(m.tp, exhaustive_max_matching(&det, &gt, 0.10));
        assert_eq!(m.tp, n);
    }

    verdict(
        "5 (oracle equivalence)",
        true,
        "7 suites, >= 100 randomized cases each, all agree",
    );
}

/// 6. Topology: thinning preserves 26-component counts and never invents
/// voxels; splitting leaves no cross-tree 26-adjacency.
#[test]
fn criterion_6_topology() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let mut voxels: HashSet<Voxel> = HashSet::new();
        for _ in 0..rng.gen_range(1..4) {
            let seed = [
                rng.gen_range(0..30),
                rng.gen_range(0..30),
                rng.gen_range(0..30),
            ];
            let mut blob = vec![seed];
            voxels.insert(seed);
            for _ in 0..rng.gen_range(10..200) {
                let base = blob[rng.gen_range(0..blob.len())];
                let off = NEIGHBORS_26[rng.gen_range(0..26)];
                let n = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
                if voxels.insert(n) {
                    blob.push(n);
                }
            }
        }
        let pts: Vec<Point3<f64>> = voxels
            .iter()
            .map(|v| Point3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5))
            .collect();
        let grid = voxelize(&ColorPointCloud::from_points(pts), 1.0).unwrap();
        let before = connected_components(grid.occupied()).len();
        let sk = skeletonize(&grid).unwrap();
        for v in &sk.voxels {
            assert!(grid.is_occupied(*v), "skeleton added voxel {v:?}");
        }
        assert_eq!(
            before,
            connected_components(&sk.voxels).len(),
            "component count changed"
        );
    }

    // Spanning components across bridged synthetic scenes.
    let cfg = PipelineConfig::default();
    let mut spanning_seen = 0usize;
    for seed in 600..605u64 {
        let spec = SceneSpec {
            n_trees: 4,
            apples_per_tree: 0,
            spanning_bridges: 2,
            seed,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let seg = segment_winter(&scene.winter, &cfg).unwrap();
        let grid = voxelize(&seg.trees_cloud, cfg.voxel_edge).unwrap();
        let sk = skeletonize(&grid).unwrap();
        let comps = connected_components(&sk.voxels);
        let statuses = assign_components(&comps, &sk, &seg.trees, &cfg);
        for (comp, status) in comps.iter().zip(&statuses) {
            let ComponentStatus::Spanning(ids) = status else {
                continue;
            };
            spanning_seen += 1;
            let pieces = split_spanning(comp, ids, &sk, &seg.trees, &cfg);
            let mut owner: HashMap<Voxel, u32> = HashMap::new();
            for (piece, tree) in &pieces {
                for v in piece {
                    owner.insert(*v, *tree);
                }
            }
            for (v, t) in &owner {
                for off in NEIGHBORS_26 {
                    let n = [v[0] + off[0], v[1] + off[1], v[2] + off[2]];
                    if let Some(other) = owner.get(&n) {
                        assert_eq!(
                            other, t,
                            "cross-tree adjacency between {v:?} and {n:?}"
                        );
                    }
                }
            }
        }
    }
    let ok = spanning_seen > 0;
    verdict(
        "6 (topology)",
        ok,
        &format!("50 blobs preserved; {spanning_seen} spanning components split with zero cross-tree adjacency"),
    );
}

/// 7. Wire and pole segmentation quality on synthetic scenes.
#[test]
fn criterion_7_wire_pole_segmentation() {
    let cfg = PipelineConfig::default();
    let mut wire_re = Vec::new();
    let mut wire_pr = Vec::new();
    let mut pole_re = Vec::new();
    let mut pole_pr = Vec::new();
    for seed in 700..705u64 {
        let spec = SceneSpec {
            n_trees: 4,
            apples_per_tree: 0,
            seed,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let out = run_pipeline(&inputs_from(&scene), &cfg, &RunOptions::default()).unwrap();
        let classes = &out.report.metrics.as_ref().unwrap().classes;
        let wire = &classes["TrellisWireWaterPipe"];
        let pole = &classes["SupportPole"];
        wire_re.push(wire.recall.value().unwrap());
        wire_pr.push(wire.precision.value().unwrap());
        pole_re.push(pole.recall.value().unwrap());
        pole_pr.push(pole.precision.value().unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (wr, wp, pr, pp) = (
        mean(&wire_re),
        mean(&wire_pr),
        mean(&pole_re),
        mean(&pole_pr),
    );
    let ok = wr >= 0.85 && pr >= 0.90 && wp >= 0.90 && pp >= 0.90;
    verdict(
        "7 (wire/pole segmentation)",
        ok,
        &format!(
            "wire Re {wr:.3} (>= 0.85) Pr {wp:.3}; pole Re {pr:.3} (>= 0.90) Pr {pp:.3} (>= 0.90), 5 scenes"
        ),
    );
}

/// 8. Determinism: comparable report sections byte-identical across runs.
#[test]
fn criterion_8_determinism() {
    let scene = generate_scene(&SceneSpec {
        n_trees: 4,
        seed: 8,
        ..SceneSpec::default()
    })
    .unwrap();
    let inputs = inputs_from(&scene);
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&inputs, &cfg, &RunOptions::default()).unwrap();
    let b = run_pipeline(&inputs, &cfg, &RunOptions::default()).unwrap();
    let ok = a.report.comparable_json() == b.report.comparable_json();
    verdict(
        "8 (determinism)",
        ok,
        &format!(
            "comparable report sections identical across two runs ({} bytes)",
            a.report.comparable_json().len()
        ),
    );
}

// ---- independent oracles ----

fn union_find_count(voxels: &[Voxel]) -> usize {
    let idx: HashMap<Voxel, usize> = voxels.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..voxels.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, v) in voxels.iter().enumerate() {
        for off in NEIGHBORS_26 {
            let n = [v[0] + off[0], v[1] + off[1], v[2] + off[2]];
            if let Some(&j) = idx.get(&n) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..voxels.len())
        .filter(|&i| find(&mut parent, i) == i)
        .count()
}

fn dijkstra_hops(set: &HashSet<Voxel>, start: Voxel, end: Voxel) -> Option<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist: HashMap<Voxel, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0);
    heap.push(Reverse((0usize, start)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if v == end {
            return Some(d);
        }
        if d > dist[&v] {
            continue;
        }
        for off in NEIGHBORS_26 {
            let n = [v[0] + off[0], v[1] + off[1], v[2] + off[2]];
            if set.contains(&n) && dist.get(&n).map_or(true, |&old| d + 1 < old) {
                dist.insert(n, d + 1);
                heap.push(Reverse((d + 1, n)));
            }
        }
    }
    None
}

/// HSV derived independently of the library's hexcone implementation.
fn independent_hsv(c: [u8; 3]) -> (f64, f64, f64) {
    let r = c[0] as f64 / 255.0;
    let g = c[1] as f64 / 255.0;
    let b = c[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        let mut h = (g - b) / delta / 6.0;
        if h < 0.0 {
            h += 1.0;
        }
        h
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn exhaustive_max_matching(det: &[Point3<f64>], gt: &[Point3<f64>], radius: f64) -> usize {
    fn rec(
        g: usize,
        used: &mut Vec<bool>,
        det: &[Point3<f64>],
        gt: &[Point3<f64>],
        radius: f64,
    ) -> usize {
        if g == gt.len() {
            return 0;
        }
        let mut best = rec(g + 1, used, det, gt, radius);
        for d in 0..det.len() {
            if !used[d] && (det[d] - gt[g]).norm() <= radius {
                used[d] = true;
                best = best.max(1 + rec(g + 1, used, det, gt, radius));
                used[d] = false;
            }
        }
        best
    }
    let mut used = vec![false; det.len()];
    rec(0, &mut used, det, gt, radius)
}
