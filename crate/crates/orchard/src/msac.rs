//! MSAC (M-estimator sample consensus) plane and line fitting.
//!
//! Scoring is the truncated quadratic sum(min(r^2, tol^2)). Iteration count
//! adapts to the running inlier ratio at 99.9% confidence, capped at 10000.
//! All sampling goes through a caller-seeded PRNG for reproducibility.

use nalgebra::{Matrix3, Point3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{point_line_distance, Line3, Plane3};
use crate::error::{OrchardError, Result};

const CONFIDENCE: f64 = 0.999;
const MAX_ITERS: usize = 10_000;

fn adaptive_iters(inlier_ratio: f64, sample_size: u32) -> usize {
    if inlier_ratio <= 0.0 {
        return MAX_ITERS;
    }
    let w = inlier_ratio.min(1.0 - 1e-12).powi(sample_size as i32);
    if w >= 1.0 - 1e-12 {
        return 1;
    }
    let n = (1.0 - CONFIDENCE).ln() / (1.0 - w).ln();
    (n.ceil() as usize).clamp(1, MAX_ITERS)
}

fn msac_score(residuals: impl Iterator<Item = f64>, tol: f64) -> f64 {
    let t2 = tol * tol;
    residuals.map(|r| (r * r).min(t2)).sum()
}

/// Least-squares plane through a point set (PCA smallest axis).
fn lsq_plane(points: &[Point3<f64>], indices: &[usize]) -> Option<Plane3> {
    if indices.len() < 3 {
        return None;
    }
    let mut centroid = Vector3::zeros();
    for &i in indices {
        centroid += points[i].coords;
    }
    centroid /= indices.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = points[i].coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_k = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] < eig.eigenvalues[min_k] {
            min_k = k;
        }
    }
    let n = eig.eigenvectors.column(min_k).into_owned();
    if n.norm_squared() < 1e-20 {
        return None;
    }
    Some(Plane3::from_point_normal(
        &Point3::from(centroid),
        Unit::new_normalize(n),
    ))
}

/// Robust plane fit. Returns the winning model and its inlier indices.
pub fn fit_plane_msac(
    points: &[Point3<f64>],
    inlier_tol: f64,
    seed: u64,
) -> Result<(Plane3, Vec<usize>)> {
    if points.len() < 3 {
        return Err(OrchardError::DegenerateInput("plane fit needs >= 3 points"));
    }
    let all: Vec<usize> = (0..points.len()).collect();
    // Collinear input can never define a plane.
    if lsq_plane(points, &all).is_none() || is_collinear(points) {
        return Err(OrchardError::DegenerateInput("all points collinear"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Plane3, f64)> = None;
    let mut max_iters = MAX_ITERS;
    let mut it = 0;
    while it < max_iters {
        it += 1;
        let a = rng.gen_range(0..points.len());
        let b = rng.gen_range(0..points.len());
        let c = rng.gen_range(0..points.len());
        if a == b || b == c || a == c {
            continue;
        }
        let Some(plane) = Plane3::from_three_points(&points[a], &points[b], &points[c]) else {
            continue;
        };
        let score = msac_score(points.iter().map(|p| plane.signed_distance(p)), inlier_tol);
        if best.as_ref().map_or(true, |(_, s)| score < *s) {
            let inliers = points
                .iter()
                .filter(|p| plane.signed_distance(p).abs() <= inlier_tol)
                .count();
            max_iters = max_iters.min(it + adaptive_iters(inliers as f64 / points.len() as f64, 3));
            best = Some((plane, score));
        }
    }
    let (mut plane, mut score) = best.ok_or(OrchardError::DegenerateInput("no valid plane"))?;
    // Refine on the consensus set; keep the refit only if it scores no worse.
    let inliers: Vec<usize> = (0..points.len())
        .filter(|&i| plane.signed_distance(&points[i]).abs() <= inlier_tol)
        .collect();
    if let Some(refit) = lsq_plane(points, &inliers) {
        let s = msac_score(points.iter().map(|p| refit.signed_distance(p)), inlier_tol);
        if s <= score {
            plane = refit;
            score = s;
        }
    }
    let _ = score;
    let inliers: Vec<usize> = (0..points.len())
        .filter(|&i| plane.signed_distance(&points[i]).abs() <= inlier_tol)
        .collect();
    Ok((plane, inliers))
}

fn is_collinear(points: &[Point3<f64>]) -> bool {
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p.coords;
    }
    centroid /= points.len() as f64;
    let mut cov = Matrix3::zeros();
    let mut scale = 0.0f64;
    for p in points {
        let d = p.coords - centroid;
        scale = scale.max(d.norm_squared());
        cov += d * d.transpose();
    }
    if scale == 0.0 {
        return true;
    }
    let eig = cov.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Two near-zero eigenvalues relative to the spread mean a 1D point set.
    vals[1] / (scale * points.len() as f64) < 1e-16
}

/// Least-squares line through the indexed points (PCA principal axis).
fn lsq_line(points: &[Point3<f64>], indices: &[usize]) -> Option<Line3> {
    if indices.len() < 2 {
        return None;
    }
    let mut centroid = Vector3::zeros();
    for &i in indices {
        centroid += points[i].coords;
    }
    centroid /= indices.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = points[i].coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut max_k = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] > eig.eigenvalues[max_k] {
            max_k = k;
        }
    }
    if eig.eigenvalues[max_k] <= 0.0 {
        return None;
    }
    let dir = Unit::new_normalize(eig.eigenvectors.column(max_k).into_owned());
    Some(Line3::from_point_dir(Point3::from(centroid), dir))
}

fn fit_single_line(
    points: &[Point3<f64>],
    active: &[usize],
    inlier_tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Line3, Vec<usize>)> {
    if active.len() < 2 {
        return Err(OrchardError::DegenerateInput("line fit needs >= 2 points"));
    }
    if active.len() == 2 {
        let line = Line3::new(points[active[0]], points[active[1]])
            .map_err(|_| OrchardError::DegenerateInput("coincident line sample"))?;
        return Ok((line, active.to_vec()));
    }
    let mut best: Option<(Line3, f64)> = None;
    let mut max_iters = MAX_ITERS;
    let mut it = 0;
    while it < max_iters {
        it += 1;
        let a = active[rng.gen_range(0..active.len())];
        let b = active[rng.gen_range(0..active.len())];
        if a == b {
            continue;
        }
        let Ok(line) = Line3::new(points[a], points[b]) else {
            continue;
        };
        let score = msac_score(
            active
                .iter()
                .map(|&i| point_line_distance(&points[i], &line).unwrap()),
            inlier_tol,
        );
        if best.as_ref().map_or(true, |(_, s)| score < *s) {
            let inliers = active
                .iter()
                .filter(|&&i| point_line_distance(&points[i], &line).unwrap() <= inlier_tol)
                .count();
            max_iters = max_iters.min(it + adaptive_iters(inliers as f64 / active.len() as f64, 2));
            best = Some((line, score));
        }
    }
    let (mut line, score) = best.ok_or(OrchardError::DegenerateInput("no valid line"))?;
    let inliers: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| point_line_distance(&points[i], &line).unwrap() <= inlier_tol)
        .collect();
    if let Some(refit) = lsq_line(points, &inliers) {
        let s = msac_score(
            active
                .iter()
                .map(|&i| point_line_distance(&points[i], &refit).unwrap()),
            inlier_tol,
        );
        if s <= score {
            line = refit;
        }
    }
    let inliers: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| point_line_distance(&points[i], &line).unwrap() <= inlier_tol)
        .collect();
    Ok((line, inliers))
}

/// Sequential robust line fit: `count` lines, each fit on the points not
/// claimed by the previous line's consensus set. Inlier indices refer to the
/// original `points` slice.
pub fn fit_line_msac(
    points: &[Point3<f64>],
    inlier_tol: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<(Line3, Vec<usize>)>> {
    assert!(count == 1 || count == 2, "count must be 1 or 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<usize> = (0..points.len()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, inliers) = fit_single_line(points, &active, inlier_tol, &mut rng)?;
        let taken: std::collections::HashSet<usize> = inliers.iter().copied().collect();
        active.retain(|i| !taken.contains(i));
        out.push((line, inliers));
    }
    Ok(out)
}
