//! Semantic segmentation of the calibrated winter cloud: trellis-line and
//! trellis-plane estimation, trunk localization and verification, support
//! pole detection, wire/water-pipe labeling and removal.

use std::collections::{HashMap, HashSet};

use nalgebra::{Matrix3, Point2, Point3, Unit, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{point_line_distance, ColorPointCloud, Line3, Plane3};
use crate::config::PipelineConfig;
use crate::error::{OrchardError, Result};
use crate::hough;
use crate::knn::KdTree;
use crate::msac::{fit_line_msac, fit_plane_msac};
use crate::skeleton::skeletonize;
use crate::voxel::{path_length, shortest_path, voxelize, Voxel};

/// Per-point semantic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SemanticLabel {
    Branch,
    TreeTrunk,
    TrellisWireWaterPipe,
    SupportPole,
}

impl SemanticLabel {
    /// Integer code used in PLY sidecars.
    pub fn code(self) -> i32 {
        match self {
            SemanticLabel::Branch => 0,
            SemanticLabel::TreeTrunk => 1,
            SemanticLabel::TrellisWireWaterPipe => 2,
            SemanticLabel::SupportPole => 3,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            0 => Some(SemanticLabel::Branch),
            1 => Some(SemanticLabel::TreeTrunk),
            2 => Some(SemanticLabel::TrellisWireWaterPipe),
            3 => Some(SemanticLabel::SupportPole),
            _ => None,
        }
    }
}

/// Canonical trellis frame: the fitted plane (original coordinates), the
/// rotation into the trellis-aligned frame and the merged wire heights.
#[derive(Debug, Clone)]
pub struct TrellisFrame {
    pub plane: Plane3,
    /// Applied as p_hat = rotation * p - (x_offset, 0, 0).
    pub rotation: Matrix3<f64>,
    /// Shift that puts the trellis-plane exactly at x_hat = 0.
    pub x_offset: f64,
    /// Merged trellis-line heights, ascending.
    pub line_heights: Vec<f64>,
}

impl TrellisFrame {
    pub fn to_frame(&self, p: &Point3<f64>) -> Point3<f64> {
        let q = self.rotation * p.coords;
        Point3::new(q.x - self.x_offset, q.y, q.z)
    }

    pub fn from_frame(&self, p: &Point3<f64>) -> Point3<f64> {
        let q = Vector3::new(p.x + self.x_offset, p.y, p.z);
        Point3::from(self.rotation.transpose() * q)
    }
}

/// A verified tree: identity, base location on the trellis-plane and the
/// main-axis points of its trunk skeleton (trellis-frame coordinates).
#[derive(Debug, Clone)]
pub struct Tree {
    pub id: u32,
    pub base_y: f64,
    pub main_axis: Vec<Point3<f64>>,
}

impl Tree {
    pub fn base(&self) -> Point3<f64> {
        Point3::new(0.0, self.base_y, 0.0)
    }

    pub fn top_z(&self) -> f64 {
        self.main_axis
            .iter()
            .map(|p| p.z)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TreeSet {
    pub trees: Vec<Tree>,
}

/// Pole detection outcome for one candidate.
#[derive(Debug, Clone)]
pub struct PoleDetection {
    pub candidate_y: f64,
    pub shell_ratio: f64,
    /// Indices (into the trellis-frame cloud) labeled as pole points.
    pub shell_indices: Vec<usize>,
}

/// Trunk candidate from the ground histogram.
#[derive(Debug, Clone, Copy)]
pub struct TrunkCandidate {
    pub y: f64,
    pub bin_i: i32,
    pub bin_j: i32,
    pub count: u32,
}

fn log_enabled() -> bool {
    std::env::var_os("ORCHARD_LOG").is_some()
}

/// Detect the main horizontal lines of the scene: voxelize, skeletonize,
/// project the skeleton to the YZ plane and run a 2D Hough transform. Lines
/// are back-projected to 3D at the mean depth of their supporting voxels.
pub fn detect_horizontal_lines(cloud: &ColorPointCloud, cfg: &PipelineConfig) -> Result<Vec<Line3>> {
    let grid = voxelize(cloud, cfg.voxel_edge)?;
    let sk = skeletonize(&grid)?;
    let mut pixel_set: HashSet<(i32, i32)> = HashSet::new();
    for v in &sk.voxels {
        pixel_set.insert((v[1], v[2]));
    }
    let mut pixels: Vec<(i32, i32)> = pixel_set.into_iter().collect();
    pixels.sort_unstable();
    let lines2d = hough::find_lines(
        &pixels,
        cfg.hough_theta_step_deg,
        cfg.hough_peak_frac,
        cfg.hough_max_angle_deg,
    );
    let mut out = Vec::new();
    for l in &lines2d {
        // Supporting skeleton voxels give the 3D depth and the extent.
        let support: Vec<&Voxel> = sk
            .voxels
            .iter()
            .filter(|v| l.distance_to(v[1] as f64, v[2] as f64) <= 1.5)
            .collect();
        if support.len() < 2 {
            continue;
        }
        let depth =
            support.iter().map(|v| sk.voxel_center(**v).x).sum::<f64>() / support.len() as f64;
        let (du, dv) = l.direction();
        let proj = |v: &Voxel| v[1] as f64 * du + v[2] as f64 * dv;
        let lo = support
            .iter()
            .min_by(|a, b| proj(a).partial_cmp(&proj(b)).unwrap())
            .unwrap();
        let hi = support
            .iter()
            .max_by(|a, b| proj(a).partial_cmp(&proj(b)).unwrap())
            .unwrap();
        let at = |v: &Voxel| {
            let c = sk.voxel_center(*v);
            Point3::new(depth, c.y, c.z)
        };
        if let Ok(line) = Line3::new(at(lo), at(hi)) {
            out.push(line);
        }
    }
    if out.is_empty() {
        return Err(OrchardError::NoTrellisFound);
    }
    Ok(out)
}

/// Fit the trellis-plane to the points near the horizontal lines and rotate
/// the cloud into the trellis-aligned frame.
pub fn estimate_trellis_frame(
    cloud: &ColorPointCloud,
    lines: &[Line3],
    cfg: &PipelineConfig,
) -> Result<(TrellisFrame, ColorPointCloud)> {
    if lines.is_empty() {
        return Err(OrchardError::NoTrellisFound);
    }
    let tube: Vec<usize> = (0..cloud.len())
        .into_par_iter()
        .filter(|&i| {
            lines
                .iter()
                .any(|l| point_line_distance(&cloud.points[i], l).unwrap() <= cfg.line_tube)
        })
        .collect();
    let tr_points: Vec<Point3<f64>> = tube.iter().map(|&i| cloud.points[i]).collect();
    let (plane, _) = fit_plane_msac(&tr_points, cfg.plane_tol, cfg.seed)
        .map_err(|_| OrchardError::NoTrellisFound)?;

    // Average line direction, each oriented into the +y hemisphere.
    let mut dir_sum = Vector3::zeros();
    for l in lines {
        let d = l.direction().into_inner();
        dir_sum += if d.y < 0.0 { -d } else { d };
    }
    if dir_sum.norm() < 1e-12 {
        return Err(OrchardError::NoTrellisFound);
    }
    let u_y = Unit::new_normalize(dir_sum);
    let mut n = plane.normal.into_inner();
    let mut u_z = u_y.cross(&n);
    if u_z.z < 0.0 {
        n = -n;
        u_z = -u_z;
    }
    let u_z = Unit::new_normalize(u_z);
    let u_x = Unit::new_normalize(u_y.cross(&u_z));
    let rotation = Matrix3::from_rows(&[
        u_x.into_inner().transpose(),
        u_y.into_inner().transpose(),
        u_z.into_inner().transpose(),
    ]);
    // Point on the plane closest to the origin fixes the x_hat offset.
    let p0 = -plane.d * n;
    let x_offset = u_x.dot(&p0);
    let frame = TrellisFrame {
        plane,
        rotation,
        x_offset,
        line_heights: Vec::new(),
    };
    let tp_points: Vec<Point3<f64>> = cloud.points.par_iter().map(|p| frame.to_frame(p)).collect();
    Ok((
        frame,
        ColorPointCloud {
            points: tp_points,
            colors: cloud.colors.clone(),
        },
    ))
}

/// Cluster the horizontal lines by height: ascending single pass, joining a
/// line to the running group when it is within the merge distance of the
/// group mean.
pub fn merge_trellis_lines(lines: &[Line3], frame: &TrellisFrame, cfg: &PipelineConfig) -> Vec<f64> {
    let mut heights: Vec<f64> = lines
        .iter()
        .map(|l| {
            let a = frame.to_frame(&l.a);
            let b = frame.to_frame(&l.b);
            (a.z + b.z) / 2.0
        })
        .collect();
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut groups: Vec<(f64, usize)> = Vec::new(); // (mean, count)
    for z in heights {
        match groups.last_mut() {
            Some((mean, count)) if (z - *mean).abs() <= cfg.wire_merge_dist => {
                *mean = (*mean * *count as f64 + z) / (*count as f64 + 1.0);
                *count += 1;
            }
            _ => groups.push((z, 1)),
        }
    }
    groups.into_iter().map(|(m, _)| m).collect()
}

/// Histogram the near-plane slab onto the ground grid and return the
/// non-maximum-suppressed density peaks as candidate trunk locations.
pub fn locate_trunk_candidates(
    tp_cloud: &ColorPointCloud,
    cfg: &PipelineConfig,
) -> Result<Vec<TrunkCandidate>> {
    let slab: Vec<&Point3<f64>> = tp_cloud
        .points
        .iter()
        .filter(|p| p.x.abs() < cfg.slab_halfwidth)
        .collect();
    if slab.is_empty() {
        return Err(OrchardError::NoTrunkCandidates);
    }
    let x_min = slab.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let y_min = slab.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let mut bins: HashMap<(i32, i32), u32> = HashMap::new();
    for p in &slab {
        let i = ((p.x - x_min) / cfg.ground_grid).floor() as i32;
        let j = ((p.y - y_min) / cfg.ground_grid).floor() as i32;
        *bins.entry((i, j)).or_insert(0) += 1;
    }
    let mut counts: Vec<u32> = bins.values().copied().collect();
    counts.sort_unstable();
    let median = counts[counts.len() / 2] as f64;
    let threshold = cfg.nms_peak_factor * median;

    let mut cells: Vec<((i32, i32), u32)> = bins
        .into_iter()
        .filter(|(_, c)| (*c as f64) > threshold)
        .collect();
    cells.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let win = ((cfg.nms_window / cfg.ground_grid) / 2.0).floor() as i32;
    let mut kept: Vec<((i32, i32), u32)> = Vec::new();
    'next: for cell in cells {
        for k in &kept {
            if (cell.0 .0 - k.0 .0).abs() <= win && (cell.0 .1 - k.0 .1).abs() <= win {
                continue 'next;
            }
        }
        kept.push(cell);
    }
    if kept.is_empty() {
        return Err(OrchardError::NoTrunkCandidates);
    }
    let mut out: Vec<TrunkCandidate> = kept
        .into_iter()
        .map(|((i, j), count)| TrunkCandidate {
            y: j as f64 * cfg.ground_grid + y_min,
            bin_i: i,
            bin_j: j,
            count,
        })
        .collect();
    out.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap());
    Ok(out)
}

fn cylinder_indices(tp_cloud: &ColorPointCloud, y: f64, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    (0..tp_cloud.len())
        .filter(|&i| {
            let p = &tp_cloud.points[i];
            p.x * p.x + (p.y - y) * (p.y - y) < r2
        })
        .collect()
}

/// Skeleton-path verification of trunk candidates; candidates whose main
/// axis is too short are dropped, pole-shaped ones are routed to the pole
/// detector, the rest become trees.
pub fn verify_trunks(
    tp_cloud: &ColorPointCloud,
    candidates: &[TrunkCandidate],
    cfg: &PipelineConfig,
) -> Result<(TreeSet, Vec<PoleDetection>)> {
    let mut trees = Vec::new();
    let mut poles = Vec::new();
    for cand in candidates {
        // A wide pole yields density peaks on both its front and back
        // surface; candidates inside an accepted pole are the same structure.
        if poles
            .iter()
            .any(|pd: &PoleDetection| (cand.y - pd.candidate_y).abs() < cfg.trunk_cyl_radius)
        {
            continue;
        }
        let cyl = cylinder_indices(tp_cloud, cand.y, cfg.trunk_cyl_radius);
        if cyl.is_empty() {
            continue;
        }
        let sub = tp_cloud.select(&cyl);
        let grid = voxelize(&sub, cfg.voxel_edge)?;
        let sk = skeletonize(&grid)?;
        // Largest skeleton component carries the trunk.
        let comps = crate::voxel::connected_components(&sk.voxels);
        let comp = comps.iter().max_by_key(|c| c.len()).unwrap();
        let set: HashSet<Voxel> = comp.iter().copied().collect();
        let top = *comp.iter().max_by_key(|v| (v[2], v[0], v[1])).unwrap();
        let bottom = *comp.iter().min_by_key(|v| (v[2], v[0], v[1])).unwrap();
        let path = match shortest_path(&set, bottom, top) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let d = path_length(&path, cfg.voxel_edge);
        if d <= cfg.min_trunk_path {
            continue;
        }
        let (is_pole, shell, ratio) = detect_support_pole(tp_cloud, &cyl, cfg);
        if log_enabled() {
            eprintln!(
                "trunk candidate y={:.3}: {} pts, path {:.2}m, pole ratio {:.3}",
                cand.y,
                cyl.len(),
                d,
                ratio
            );
        }
        if is_pole {
            poles.push(PoleDetection {
                candidate_y: cand.y,
                shell_ratio: ratio,
                shell_indices: shell,
            });
        } else {
            let main_axis: Vec<Point3<f64>> = path.iter().map(|v| sk.voxel_center(*v)).collect();
            trees.push(Tree {
                id: trees.len() as u32 + 1,
                base_y: cand.y,
                main_axis,
            });
        }
    }
    Ok((TreeSet { trees }, poles))
}

/// Fixed-radius circle fit per horizontal slice; a candidate is a support
/// pole when most of its cylinder points fall in a thin shell at the known
/// pole radius over the pole height. Returns (is_pole, shell indices, ratio).
pub fn detect_support_pole(
    tp_cloud: &ColorPointCloud,
    cyl_indices: &[usize],
    cfg: &PipelineConfig,
) -> (bool, Vec<usize>, f64) {
    if cyl_indices.len() < cfg.pole_min_points {
        return (false, Vec::new(), 0.0);
    }
    let z_min = cyl_indices
        .iter()
        .map(|&i| tp_cloud.points[i].z)
        .fold(f64::INFINITY, f64::min);
    let mut slices: HashMap<i64, Vec<usize>> = HashMap::new();
    for &i in cyl_indices {
        let p = &tp_cloud.points[i];
        if p.z - z_min > cfg.pole_height {
            continue;
        }
        let s = ((p.z - z_min) / cfg.pole_slice).floor() as i64;
        slices.entry(s).or_default().push(i);
    }
    let mut shell = Vec::new();
    let mut keys: Vec<i64> = slices.keys().copied().collect();
    keys.sort_unstable();
    for s in keys {
        let idxs = &slices[&s];
        if idxs.len() < 3 {
            continue;
        }
        // Fixed-radius center: iterate c = mean(p - r * unit(p - c)).
        let mut c = Point2::new(0.0, 0.0);
        for &i in idxs {
            c.coords += Vector2::new(tp_cloud.points[i].x, tp_cloud.points[i].y);
        }
        c.coords /= idxs.len() as f64;
        // Two rounds: a free pass, then a trimmed pass that drops points far
        // off the pole radius (wires crossing the slice drag the center).
        for round in 0..2 {
            for _ in 0..5 {
                let mut acc = Vector2::zeros();
                let mut n = 0usize;
                for &i in idxs {
                    let p = Vector2::new(tp_cloud.points[i].x, tp_cloud.points[i].y);
                    let radial = p - c.coords;
                    let len = radial.norm();
                    if len < 1e-9 {
                        continue;
                    }
                    if round > 0 && (len - cfg.pole_radius).abs() > 3.0 * cfg.pole_shell_halfwidth {
                        continue;
                    }
                    acc += p - radial / len * cfg.pole_radius;
                    n += 1;
                }
                if n == 0 {
                    break;
                }
                c = Point2::from(acc / n as f64);
            }
        }
        let lo = cfg.pole_radius - cfg.pole_shell_halfwidth;
        let hi = cfg.pole_radius + cfg.pole_shell_halfwidth;
        let before = shell.len();
        for &i in idxs {
            let p = Vector2::new(tp_cloud.points[i].x, tp_cloud.points[i].y);
            let r = (p - c.coords).norm();
            if r >= lo && r <= hi {
                shell.push(i);
            }
        }
        if log_enabled() {
            eprintln!(
                "pole slice {s}: {} pts, center ({:.3},{:.3}), {} in shell",
                idxs.len(),
                c.x,
                c.y,
                shell.len() - before
            );
        }
    }
    let ratio = shell.len() as f64 / cyl_indices.len() as f64;
    (ratio > cfg.pole_ratio, shell, ratio)
}

/// Label points within the trunk distance of any tree's main axis.
pub fn label_trunk_points(
    tp_cloud: &ColorPointCloud,
    trees: &TreeSet,
    labeling: &mut [SemanticLabel],
) {
    let axis_points: Vec<Point3<f64>> = trees
        .trees
        .iter()
        .flat_map(|t| t.main_axis.iter().copied())
        .collect();
    if axis_points.is_empty() {
        return;
    }
    let kd = KdTree::build(&axis_points);
    let dists: Vec<f64> = tp_cloud
        .points
        .par_iter()
        .map(|p| kd.nearest(p).map(|(_, d)| d).unwrap_or(f64::INFINITY))
        .collect();
    let tol = 0.03_f64;
    for (i, d) in dists.iter().enumerate() {
        if *d <= tol {
            labeling[i] = SemanticLabel::TreeTrunk;
        }
    }
}

/// Wire/water-pipe labeling: per trellis level and adjacent trunk pair
/// (including the two scene edges), robustly fit lines inside the segment
/// cylinder and label their inliers.
pub fn label_wire_points(
    tp_cloud: &ColorPointCloud,
    frame: &TrellisFrame,
    trees: &TreeSet,
    labeling: &mut [SemanticLabel],
    cfg: &PipelineConfig,
) {
    if frame.line_heights.is_empty() {
        return;
    }
    let kd = KdTree::build(&tp_cloud.points);
    let y_min = tp_cloud.points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_max = tp_cloud
        .points
        .iter()
        .map(|p| p.y)
        .fold(f64::NEG_INFINITY, f64::max);

    for (q, &zq) in frame.line_heights.iter().enumerate() {
        // Edge anchors are searched inside the 1cm tube of the trellis-line.
        let tube: Vec<usize> = (0..tp_cloud.len())
            .filter(|&i| {
                let p = &tp_cloud.points[i];
                (p.x * p.x + (p.z - zq) * (p.z - zq)).sqrt() <= cfg.line_tube
            })
            .collect();
        if tube.is_empty() {
            if log_enabled() {
                eprintln!("level {q}: empty trellis-line tube, skipped");
            }
            continue;
        }
        let edge_anchor = |target_y: f64| -> Point3<f64> {
            let t = Point3::new(0.0, target_y, zq);
            let best = tube
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (tp_cloud.points[a] - t).norm();
                    let db = (tp_cloud.points[b] - t).norm();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .unwrap();
            tp_cloud.points[*best]
        };
        // Anchor sequence: left edge, wire/trunk intersections, right edge.
        let mut anchors: Vec<(Point3<f64>, Option<f64>)> = Vec::new();
        anchors.push((edge_anchor(y_min), None));
        for t in &trees.trees {
            let target = Point3::new(0.0, t.base_y, zq);
            if let Ok((i, _)) = kd.nearest(&target) {
                anchors.push((tp_cloud.points[i], Some(t.base_y)));
            }
        }
        anchors.push((edge_anchor(y_max), None));

        for j in 0..anchors.len() - 1 {
            let (a, ya) = anchors[j];
            let (b, yb) = anchors[j + 1];
            let Ok(axis) = Line3::new(a, b) else { continue };
            let y_lo = ya.map(|y| y + cfg.trunk_offset).unwrap_or(f64::NEG_INFINITY);
            let y_hi = yb.map(|y| y - cfg.trunk_offset).unwrap_or(f64::INFINITY);
            let seg: Vec<usize> = (0..tp_cloud.len())
                .filter(|&i| {
                    // Trunk and pole points are already accounted for.
                    if labeling[i] == SemanticLabel::TreeTrunk
                        || labeling[i] == SemanticLabel::SupportPole
                    {
                        return false;
                    }
                    let p = &tp_cloud.points[i];
                    p.y > y_lo
                        && p.y < y_hi
                        && point_line_distance(p, &axis).unwrap() <= cfg.segment_cyl_radius
                })
                .collect();
            let (count, tol) = if q == 0 {
                (2usize, cfg.wire_tol_low)
            } else {
                (1usize, cfg.wire_tol_high)
            };
            // The anchor chord already runs close to the wire; fit only near
            // it so denser wood higher in the cylinder cannot outvote the
            // thin wire. Labeling below still covers the whole cylinder.
            let pts: Vec<Point3<f64>> = seg
                .iter()
                .map(|&i| tp_cloud.points[i])
                .filter(|p| point_line_distance(p, &axis).unwrap() <= tol)
                .collect();
            if pts.len() < 2 {
                if log_enabled() {
                    eprintln!("level {q} segment {j}: <2 points, skipped");
                }
                continue;
            }
            let seed = cfg
                .seed
                .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul((q as u64 + 1) * 131 + j as u64));
            let fits = match fit_line_msac(&pts, tol, seed, count) {
                Ok(f) => f,
                Err(_) if count == 2 => match fit_line_msac(&pts, tol, seed, 1) {
                    Ok(f) => f,
                    Err(_) => continue,
                },
                Err(_) => continue,
            };
            for (line, _) in fits {
                for &gi in &seg {
                    if labeling[gi] == SemanticLabel::Branch
                        && point_line_distance(&tp_cloud.points[gi], &line).unwrap() <= tol
                    {
                        labeling[gi] = SemanticLabel::TrellisWireWaterPipe;
                    }
                }
            }
        }
    }
}

/// Remove wire and pole points; returns the tree cloud and the index of each
/// kept point in the input cloud.
pub fn strip_to_trees(
    tp_cloud: &ColorPointCloud,
    labeling: &[SemanticLabel],
) -> Result<(ColorPointCloud, Vec<usize>)> {
    let keep: Vec<usize> = (0..tp_cloud.len())
        .filter(|&i| {
            !matches!(
                labeling[i],
                SemanticLabel::TrellisWireWaterPipe | SemanticLabel::SupportPole
            )
        })
        .collect();
    if keep.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    Ok((tp_cloud.select(&keep), keep))
}

/// Full segmentation result for a winter cloud.
#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub frame: TrellisFrame,
    /// Winter cloud in the trellis-aligned frame (same order as input).
    pub tp_cloud: ColorPointCloud,
    pub labeling: Vec<SemanticLabel>,
    pub trees: TreeSet,
    pub poles: Vec<PoleDetection>,
    /// Tree points only (wires/poles stripped) and their indices in tp_cloud.
    pub trees_cloud: ColorPointCloud,
    pub trees_indices: Vec<usize>,
}

/// Run the whole segmentation stage on a calibrated winter cloud.
pub fn segment_winter(cloud: &ColorPointCloud, cfg: &PipelineConfig) -> Result<SegmentResult> {
    let lines = detect_horizontal_lines(cloud, cfg)?;
    let (mut frame, tp_cloud) = estimate_trellis_frame(cloud, &lines, cfg)?;
    frame.line_heights = merge_trellis_lines(&lines, &frame, cfg);
    if log_enabled() {
        eprintln!("trellis levels: {:?}", frame.line_heights);
    }
    let candidates = locate_trunk_candidates(&tp_cloud, cfg)?;
    let (trees, poles) = verify_trunks(&tp_cloud, &candidates, cfg)?;
    let mut labeling = vec![SemanticLabel::Branch; tp_cloud.len()];
    for pole in &poles {
        for &i in &pole.shell_indices {
            labeling[i] = SemanticLabel::SupportPole;
        }
    }
    label_trunk_points(&tp_cloud, &trees, &mut labeling);
    label_wire_points(&tp_cloud, &frame, &trees, &mut labeling, cfg);
    let (trees_cloud, trees_indices) = strip_to_trees(&tp_cloud, &labeling)?;
    Ok(SegmentResult {
        frame,
        tp_cloud,
        labeling,
        trees,
        poles,
        trees_cloud,
        trees_indices,
    })
}
