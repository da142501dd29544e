//! Separation of the wire-free winter cloud into individual trees: component
//! assignment, splitting of components that span several trees, attachment of
//! floating pieces and per-point label propagation.

use std::collections::HashSet;

use nalgebra::{Matrix3, Point3};
use rayon::prelude::*;

use crate::cloud::{point_line_distance, point_segment_distance, ColorPointCloud, Line3};
use crate::config::PipelineConfig;
use crate::error::{OrchardError, Result};
use crate::knn::KdTree;
use crate::segment::{SegmentResult, TreeSet};
use crate::skeleton::{skeletonize, Skeleton};
use crate::voxel::{connected_components, shortest_path, voxelize, Voxel, NEIGHBORS_26};

/// Where a skeleton component landed relative to the verified trunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentStatus {
    AssignedTo(u32),
    Spanning(Vec<u32>),
    Floating,
}

/// Calibrated-frame winter cloud with per-point tree identities. Points
/// stripped during segmentation (wires, poles) carry no identity.
#[derive(Debug, Clone)]
pub struct TreeLabeledCloud {
    pub cloud: ColorPointCloud,
    pub tree_ids: Vec<Option<u32>>,
}

impl TreeLabeledCloud {
    /// Indices and points that carry a tree identity.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.cloud.len())
            .filter(|&i| self.tree_ids[i].is_some())
            .collect()
    }
}

fn tree_segment(tree: &crate::segment::Tree) -> (Point3<f64>, Point3<f64>) {
    let top_z = tree.top_z().max(0.0);
    (
        Point3::new(0.0, tree.base_y, 0.0),
        Point3::new(0.0, tree.base_y, top_z),
    )
}

fn component_tree_distance(comp: &[Voxel], sk: &Skeleton, tree: &crate::segment::Tree) -> f64 {
    let (a, b) = tree_segment(tree);
    comp.iter()
        .map(|&v| point_segment_distance(&sk.voxel_center(v), &a, &b))
        .fold(f64::INFINITY, f64::min)
}

/// Classify each skeleton component by its distance to the trunk base
/// vertical segments.
pub fn assign_components(
    components: &[Vec<Voxel>],
    sk: &Skeleton,
    trees: &TreeSet,
    cfg: &PipelineConfig,
) -> Vec<ComponentStatus> {
    components
        .par_iter()
        .map(|comp| {
            let near: Vec<u32> = trees
                .trees
                .iter()
                .filter(|t| component_tree_distance(comp, sk, t) < cfg.comp_trunk_dist)
                .map(|t| t.id)
                .collect();
            match near.len() {
                0 => ComponentStatus::Floating,
                1 => ComponentStatus::AssignedTo(near[0]),
                _ => ComponentStatus::Spanning(near),
            }
        })
        .collect()
}

fn refreshed_axis(
    comp_set: &HashSet<Voxel>,
    comp: &[Voxel],
    sk: &Skeleton,
    tree: &crate::segment::Tree,
    cfg: &PipelineConfig,
) -> (Vec<Voxel>, Voxel) {
    let base = tree.base();
    let bottom = *comp
        .iter()
        .min_by(|a, b| {
            let da = (sk.voxel_center(**a) - base).norm();
            let db = (sk.voxel_center(**b) - base).norm();
            da.partial_cmp(&db).unwrap().then(a.cmp(b))
        })
        .unwrap();
    let r2 = cfg.trunk_cyl_radius * cfg.trunk_cyl_radius;
    let top = comp
        .iter()
        .filter(|v| {
            let c = sk.voxel_center(**v);
            c.x * c.x + (c.y - tree.base_y) * (c.y - tree.base_y) < r2
        })
        .max_by(|a, b| {
            let za = sk.voxel_center(**a).z;
            let zb = sk.voxel_center(**b).z;
            za.partial_cmp(&zb).unwrap().then(a.cmp(b))
        })
        .copied()
        .unwrap_or(bottom);
    let sp = shortest_path(comp_set, bottom, top).unwrap_or_else(|_| vec![bottom]);
    (sp, top)
}

fn near_sp(v: Voxel, sp_sets: &[HashSet<Voxel>]) -> bool {
    // A path voxel counts as trunk if within one voxel of any SP voxel.
    for set in sp_sets {
        for d in std::iter::once([0i32, 0, 0]).chain(NEIGHBORS_26.iter().copied()) {
            if set.contains(&[v[0] + d[0], v[1] + d[1], v[2] + d[2]]) {
                return true;
            }
        }
    }
    false
}

/// Cut a spanning component into per-tree pieces. Per adjacent pair of
/// spanned trees (ascending base y), the connecting path between trunk tops
/// is severed at its strongest vertical deviation until no path remains;
/// the resulting pieces are assigned to their nearest trunk.
pub fn split_spanning(
    component: &[Voxel],
    spanned: &[u32],
    sk: &Skeleton,
    trees: &TreeSet,
    cfg: &PipelineConfig,
) -> Vec<(Vec<Voxel>, u32)> {
    let mut order: Vec<&crate::segment::Tree> = spanned
        .iter()
        .map(|id| trees.trees.iter().find(|t| t.id == *id).expect("tree id"))
        .collect();
    order.sort_by(|a, b| a.base_y.partial_cmp(&b.base_y).unwrap());

    let mut set: HashSet<Voxel> = component.iter().copied().collect();
    let budget = component.len();
    for pair in order.windows(2) {
        let comp_now: Vec<Voxel> = set.iter().copied().collect();
        let (sp_a, top_a) = refreshed_axis(&set, &comp_now, sk, pair[0], cfg);
        let (sp_b, top_b) = refreshed_axis(&set, &comp_now, sk, pair[1], cfg);
        let sp_sets = vec![
            sp_a.iter().copied().collect::<HashSet<Voxel>>(),
            sp_b.iter().copied().collect::<HashSet<Voxel>>(),
        ];
        // Keep cuts out of the trunk cylinders as well: under noise the trunk
        // skeleton grows parallel strands that the SP does not cover, and
        // severing a trunk drags a whole tree across to its neighbour.
        let r2 = cfg.trunk_cyl_radius * cfg.trunk_cyl_radius;
        let in_trunk_cyl = |v: Voxel| -> bool {
            let c = sk.voxel_center(v);
            pair.iter().any(|t| {
                let dy = c.y - t.base_y;
                c.x * c.x + dy * dy < r2
            })
        };
        let mut cuts = 0usize;
        while cuts <= budget {
            let path = match shortest_path(&set, top_a, top_b) {
                Ok(p) => p,
                Err(_) => break, // already separate
            };
            let cp: Vec<Voxel> = path
                .iter()
                .copied()
                .filter(|v| !near_sp(*v, &sp_sets) && !in_trunk_cyl(*v))
                .collect();
            if cp.is_empty() {
                break;
            }
            set.remove(&cut_voxel(&cp, sk));
            cuts += 1;
        }
    }

    let remaining: Vec<Voxel> = set.iter().copied().collect();
    let pieces = connected_components(&remaining);
    pieces
        .into_iter()
        .map(|piece| {
            // Majority vote: the tree whose trunk segment is near the most
            // piece voxels wins; a lone stray voxel near the wrong trunk must
            // not flip a whole canopy. Empty votes fall back to min distance.
            let votes: Vec<usize> = order
                .iter()
                .map(|t| {
                    let (a, b) = tree_segment(t);
                    piece
                        .iter()
                        .filter(|&&v| {
                            point_segment_distance(&sk.voxel_center(v), &a, &b)
                                < cfg.comp_trunk_dist
                        })
                        .count()
                })
                .collect();
            let best = if votes.iter().all(|&c| c == 0) {
                *order
                    .iter()
                    .min_by(|a, b| {
                        let da = component_tree_distance(&piece, sk, a);
                        let db = component_tree_distance(&piece, sk, b);
                        da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
                    })
                    .unwrap()
            } else {
                let k = votes
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                    .unwrap()
                    .0;
                order[k]
            };
            (piece, best.id)
        })
        .collect()
}

/// The cut voxel is the CP voxel deviating most in z from the straight chord
/// between the CP endpoints; ties fall back to the global z-maximum.
fn cut_voxel(cp: &[Voxel], sk: &Skeleton) -> Voxel {
    let a = sk.voxel_center(cp[0]);
    let b = sk.voxel_center(cp[cp.len() - 1]);
    let dir = b - a;
    let len2 = dir.norm_squared();
    let mut best = cp[0];
    let mut best_dev = f64::NEG_INFINITY;
    let mut tied = false;
    for &v in cp {
        let c = sk.voxel_center(v);
        let t = if len2 < 1e-18 {
            0.0
        } else {
            (c - a).dot(&dir) / len2
        };
        let chord_z = a.z + t * dir.z;
        let dev = (c.z - chord_z).abs();
        if dev > best_dev + 1e-12 {
            best_dev = dev;
            best = v;
            tied = false;
        } else if (dev - best_dev).abs() <= 1e-12 {
            tied = true;
        }
    }
    if tied && best_dev < 1e-12 {
        // Degenerate flat path: fall back to the global z-maximum.
        best = *cp
            .iter()
            .max_by(|x, y| {
                let zx = sk.voxel_center(**x).z;
                let zy = sk.voxel_center(**y).z;
                zx.partial_cmp(&zy).unwrap().then(x.cmp(y))
            })
            .unwrap();
    }
    best
}

fn pca_line(points: &[Point3<f64>]) -> Option<Line3> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let centroid = points.iter().fold(Point3::origin(), |acc, p| acc + p.coords) / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] > eig.eigenvalues[k] {
            k = i;
        }
    }
    let dir = eig.eigenvectors.column(k).into_owned();
    if dir.norm() < 1e-12 {
        return None;
    }
    Some(Line3::from_point_dir(
        centroid,
        nalgebra::Unit::new_normalize(dir),
    ))
}

/// Assign a floating component to a tree: the closest assigned component
/// wins outright when it is over 3x closer than the runner-up; otherwise the
/// floating piece's end-point directions are extended and the component best
/// aligned with an extension wins.
pub fn assign_floating(
    component: &[Voxel],
    assigned: &[(Vec<Voxel>, u32)],
    sk: &Skeleton,
    cfg: &PipelineConfig,
) -> Result<u32> {
    if assigned.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    if assigned.len() == 1 {
        return Ok(assigned[0].1);
    }
    let float_centers: Vec<Point3<f64>> = component.iter().map(|&v| sk.voxel_center(v)).collect();
    // Minimum distance from the floating piece to every assigned component.
    let mut dists: Vec<(f64, usize)> = assigned
        .iter()
        .enumerate()
        .map(|(ci, (voxels, _))| {
            let kd = KdTree::build(
                &voxels
                    .iter()
                    .map(|&v| sk.voxel_center(v))
                    .collect::<Vec<_>>(),
            );
            let d = float_centers
                .iter()
                .map(|p| kd.nearest(p).map(|(_, d)| d).unwrap_or(f64::INFINITY))
                .fold(f64::INFINITY, f64::min);
            (d, ci)
        })
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let (d1, c1) = dists[0];
    let (d2, _) = dists[1];
    if d1 <= 1e-12 || d2 / d1 > cfg.floating_ratio {
        return Ok(assigned[c1].1);
    }

    // End-points: voxels with exactly one 26-neighbor inside the component.
    let comp_set: HashSet<Voxel> = component.iter().copied().collect();
    let mut endpoints: Vec<Voxel> = component
        .iter()
        .copied()
        .filter(|v| {
            NEIGHBORS_26
                .iter()
                .filter(|d| comp_set.contains(&[v[0] + d[0], v[1] + d[1], v[2] + d[2]]))
                .count()
                == 1
        })
        .collect();
    endpoints.sort_unstable();
    let kd_float = KdTree::build(&float_centers);
    let mut lines: Vec<Line3> = Vec::new();
    for e in endpoints {
        let pe = sk.voxel_center(e);
        let k = cfg.floating_k.min(float_centers.len());
        let nn = kd_float.k_nearest(&pe, k);
        let pts: Vec<Point3<f64>> = nn.iter().map(|&(i, _)| float_centers[i]).collect();
        if let Some(line) = pca_line(&pts) {
            lines.push(line);
        }
    }
    if lines.is_empty() {
        return Ok(assigned[c1].1);
    }
    let mut best = (f64::INFINITY, assigned[c1].1);
    for (voxels, tree) in assigned {
        let mut d = f64::INFINITY;
        for &v in voxels {
            let c = sk.voxel_center(v);
            for line in &lines {
                d = d.min(point_line_distance(&c, line).unwrap());
            }
        }
        if d < best.0 {
            best = (d, *tree);
        }
    }
    Ok(best.1)
}

/// Give every tree-cloud point the identity of its nearest labeled skeleton
/// voxel, then map identities back to the calibrated-frame cloud indices.
pub fn propagate_labels(
    seg: &SegmentResult,
    labeled_voxels: &[(Voxel, u32)],
    sk: &Skeleton,
) -> Result<TreeLabeledCloud> {
    if labeled_voxels.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    let centers: Vec<Point3<f64>> = labeled_voxels
        .iter()
        .map(|&(v, _)| sk.voxel_center(v))
        .collect();
    let kd = KdTree::build(&centers);
    let local_ids: Vec<u32> = seg
        .trees_cloud
        .points
        .par_iter()
        .map(|p| {
            let (i, _) = kd.nearest(p).expect("nonempty kd-tree");
            labeled_voxels[i].1
        })
        .collect();
    let mut tree_ids: Vec<Option<u32>> = vec![None; seg.tp_cloud.len()];
    for (local, &global) in seg.trees_indices.iter().enumerate() {
        tree_ids[global] = Some(local_ids[local]);
    }
    // Back to the calibrated frame via the inverse rotation.
    let points: Vec<Point3<f64>> = seg
        .tp_cloud
        .points
        .par_iter()
        .map(|p| seg.frame.from_frame(p))
        .collect();
    Ok(TreeLabeledCloud {
        cloud: ColorPointCloud {
            points,
            colors: seg.tp_cloud.colors.clone(),
        },
        tree_ids,
    })
}

/// Full separation result.
#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub statuses: Vec<ComponentStatus>,
    pub labeled: TreeLabeledCloud,
    /// Per-point tree ids in the trellis frame (aligned with seg.tp_cloud).
    pub tp_tree_ids: Vec<Option<u32>>,
}

/// Run the whole separation stage on a segmentation result.
pub fn separate_trees(seg: &SegmentResult, cfg: &PipelineConfig) -> Result<SeparationResult> {
    if seg.trees.trees.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    let grid = voxelize(&seg.trees_cloud, cfg.voxel_edge)?;
    let sk = skeletonize(&grid)?;
    let components = connected_components(&sk.voxels);
    let statuses = assign_components(&components, &sk, &seg.trees, cfg);

    let mut assigned: Vec<(Vec<Voxel>, u32)> = Vec::new();
    let mut floating: Vec<&Vec<Voxel>> = Vec::new();
    for (comp, status) in components.iter().zip(&statuses) {
        match status {
            ComponentStatus::AssignedTo(t) => assigned.push((comp.clone(), *t)),
            ComponentStatus::Spanning(ids) => {
                assigned.extend(split_spanning(comp, ids, &sk, &seg.trees, cfg));
            }
            ComponentStatus::Floating => floating.push(comp),
        }
    }
    if assigned.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    for comp in floating {
        let tree = assign_floating(comp, &assigned, &sk, cfg)?;
        assigned.push((comp.clone(), tree));
    }

    let labeled_voxels: Vec<(Voxel, u32)> = assigned
        .iter()
        .flat_map(|(voxels, t)| voxels.iter().map(move |&v| (v, *t)))
        .collect();
    let labeled = propagate_labels(seg, &labeled_voxels, &sk)?;
    let mut tp_tree_ids = vec![None; seg.tp_cloud.len()];
    for (i, id) in labeled.tree_ids.iter().enumerate() {
        tp_tree_ids[i] = *id;
    }
    Ok(SeparationResult {
        statuses,
        labeled,
        tp_tree_ids,
    })
}
