//! Point cloud and basic geometric primitives.

use nalgebra::{Point3, Unit, Vector3};

use crate::error::{OrchardError, Result};

/// A colored 3D point cloud. Coordinates are meters, colors 8-bit RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorPointCloud {
    pub points: Vec<Point3<f64>>,
    pub colors: Vec<[u8; 3]>,
}

impl ColorPointCloud {
    pub fn new(points: Vec<Point3<f64>>, colors: Vec<[u8; 3]>) -> Self {
        assert_eq!(points.len(), colors.len(), "points/colors length mismatch");
        Self { points, colors }
    }

    /// Cloud without color information; all points gray.
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        let colors = vec![[128, 128, 128]; points.len()];
        Self { points, colors }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box (min, max). Errors on an empty cloud.
    pub fn bounds(&self) -> Result<(Point3<f64>, Point3<f64>)> {
        if self.points.is_empty() {
            return Err(OrchardError::EmptyInput("cloud bounds"));
        }
        let mut min = self.points[0];
        let mut max = self.points[0];
        for p in &self.points {
            for k in 0..3 {
                if p[k] < min[k] {
                    min[k] = p[k];
                }
                if p[k] > max[k] {
                    max[k] = p[k];
                }
            }
        }
        Ok((min, max))
    }

    /// Sub-cloud of the given indices, preserving their order.
    pub fn select(&self, indices: &[usize]) -> ColorPointCloud {
        ColorPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: indices.iter().map(|&i| self.colors[i]).collect(),
        }
    }
}

/// A 3D line stored as two distinct anchor points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
}

impl Line3 {
    pub fn new(a: Point3<f64>, b: Point3<f64>) -> Result<Self> {
        if (b - a).norm_squared() == 0.0 {
            return Err(OrchardError::DegenerateLine);
        }
        Ok(Self { a, b })
    }

    pub fn from_point_dir(p: Point3<f64>, dir: Unit<Vector3<f64>>) -> Self {
        Self {
            a: p,
            b: p + dir.into_inner(),
        }
    }

    pub fn direction(&self) -> Unit<Vector3<f64>> {
        Unit::new_normalize(self.b - self.a)
    }
}

/// Perpendicular distance from `p` to the infinite line.
pub fn point_line_distance(p: &Point3<f64>, line: &Line3) -> Result<f64> {
    let d = line.b - line.a;
    let denom = d.norm();
    if denom == 0.0 {
        return Err(OrchardError::DegenerateLine);
    }
    let v1 = p - line.a;
    let v2 = p - line.b;
    Ok(v1.cross(&v2).norm() / denom)
}

/// Distance from `p` to the segment [a, b].
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Plane Ax + By + Cz + D = 0 with (A,B,C) a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3 {
    pub normal: Unit<Vector3<f64>>,
    pub d: f64,
}

impl Plane3 {
    pub fn from_point_normal(p: &Point3<f64>, normal: Unit<Vector3<f64>>) -> Self {
        let d = -normal.dot(&p.coords);
        Self { normal, d }
    }

    /// Exact plane through three points; `None` when collinear.
    pub fn from_three_points(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        if n.norm_squared() < 1e-24 {
            return None;
        }
        Some(Self::from_point_normal(a, Unit::new_normalize(n)))
    }

    /// Signed distance; the unsigned residual is its absolute value.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }
}
