//! Rigid winter→harvest registration (point-to-point ICP) and assignment of
//! detected apples to trees via nearest labeled branch point.

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apples::DetectedApple;
use crate::config::PipelineConfig;
use crate::error::{OrchardError, Result};
use crate::knn::KdTree;
use crate::separate::TreeLabeledCloud;

/// Rigid transform applied as p' = R p + T.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    /// Final RMS inlier correspondence distance (meters).
    pub fitness: f64,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            fitness: 0.0,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation[r][c])
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::new(
            self.translation[0],
            self.translation[1],
            self.translation[2],
        )
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation_matrix() * p.coords + self.translation_vector())
    }

    /// Compose: self after other, i.e. p ↦ self(other(p)).
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let r = self.rotation_matrix() * other.rotation_matrix();
        let t = self.rotation_matrix() * other.translation_vector() + self.translation_vector();
        RigidTransform {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.x, t.y, t.z],
            fitness: self.fitness,
        }
    }

    /// Rotation angle in degrees (axis-angle magnitude).
    pub fn rotation_angle_deg(&self) -> f64 {
        let r = self.rotation_matrix();
        let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }
}

fn from_matrix(r: &Matrix3<f64>, t: &Vector3<f64>, fitness: f64) -> RigidTransform {
    RigidTransform {
        rotation: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        translation: [t.x, t.y, t.z],
        fitness,
    }
}

/// Kabsch: least-squares rigid transform mapping src onto dst.
fn kabsch(src: &[Point3<f64>], dst: &[Point3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut v = vt.transpose();
        v.column_mut(2).neg_mut();
        r = v * u.transpose();
    }
    let t = cd - r * cs;
    (r, t)
}

/// Point-to-point ICP from identity initialization with fixed-radius
/// correspondence rejection. Aligns `source` onto `target`.
pub fn icp_align(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    cfg: &PipelineConfig,
) -> Result<RigidTransform> {
    if source.is_empty() || target.is_empty() {
        return Err(OrchardError::AlignmentFailed("empty cloud".into()));
    }
    let kd = KdTree::build(target);
    let mut r = Matrix3::<f64>::identity();
    let mut t = Vector3::<f64>::zeros();
    let mut prev_rms = f64::INFINITY;
    let mut rms = f64::INFINITY;
    for iter in 0..cfg.icp_max_iter {
        let moved: Vec<Point3<f64>> = source
            .par_iter()
            .map(|p| Point3::from(r * p.coords + t))
            .collect();
        let pairs: Vec<(usize, usize, f64)> = moved
            .par_iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let (j, d) = kd.nearest(p).ok()?;
                (d <= cfg.icp_reject).then_some((i, j, d))
            })
            .collect();
        if iter == 0 && pairs.len() < cfg.icp_min_corr {
            return Err(OrchardError::AlignmentFailed(format!(
                "{} correspondences within {}m (need {})",
                pairs.len(),
                cfg.icp_reject,
                cfg.icp_min_corr
            )));
        }
        if pairs.len() < 3 {
            break;
        }
        let src: Vec<Point3<f64>> = pairs.iter().map(|&(i, _, _)| source[i]).collect();
        let dst: Vec<Point3<f64>> = pairs.iter().map(|&(_, j, _)| target[j]).collect();
        let (rn, tn) = kabsch(&src, &dst);
        r = rn;
        t = tn;
        let mse: f64 = pairs
            .iter()
            .map(|&(i, j, _)| {
                let p = r * source[i].coords + t;
                (p - target[j].coords).norm_squared()
            })
            .sum::<f64>()
            / pairs.len() as f64;
        rms = mse.sqrt();
        if (prev_rms - rms).abs() < cfg.icp_converge {
            break;
        }
        prev_rms = rms;
    }
    Ok(from_matrix(&r, &t, rms))
}

/// One apple's assignment: nearest labeled winter point and its tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppleAssignment {
    pub apple_index: usize,
    pub tree_id: u32,
    pub nearest_point_index: usize,
    pub distance: f64,
}

/// Assign every apple to the tree of its nearest transformed labeled winter
/// point (exact nearest neighbor, ties to the lowest point index).
pub fn assign_apples(
    apples: &[DetectedApple],
    winter: &TreeLabeledCloud,
    transform: &RigidTransform,
) -> Result<Vec<AppleAssignment>> {
    let labeled = winter.labeled_indices();
    if labeled.is_empty() {
        return Err(OrchardError::EmptyTrees);
    }
    let moved: Vec<Point3<f64>> = labeled
        .iter()
        .map(|&i| transform.apply(&winter.cloud.points[i]))
        .collect();
    let kd = KdTree::build(&moved);
    let out: Vec<AppleAssignment> = apples
        .par_iter()
        .enumerate()
        .map(|(a, apple)| {
            let (local, d) = kd.nearest(&apple.point()).expect("nonempty labeled set");
            let gi = labeled[local];
            AppleAssignment {
                apple_index: a,
                tree_id: winter.tree_ids[gi].unwrap(),
                nearest_point_index: gi,
                distance: d,
            }
        })
        .collect();
    Ok(out)
}
