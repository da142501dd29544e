//! Calibration of raw reconstructed clouds: metric re-scale, canonical
//! orientation (Y along the tree row, Z up), region-of-interest crop and
//! re-centering at the designated tree base.

use nalgebra::{Matrix3, Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::ColorPointCloud;
use crate::error::{OrchardError, Result};

/// Slack below the estimated ground kept by the ROI crop.
const GROUND_SLACK_M: f64 = 0.3;

/// Calibration input: either observed reference-chart patch centers with the
/// two field-measured distances, or an explicit similarity transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CalibrationInput {
    Marker(MarkerObservation),
    Explicit(ExplicitTransform),
}

/// Labeled 3D patch centers of the reference chart, row-major over a
/// `grid_rows` x `grid_cols` grid with known metric spacing between
/// adjacent patch centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub marker_points: Vec<[f64; 3]>,
    pub patch_spacing_m: f64,
    #[serde(rename = "d_R_cc")]
    pub d_r_cc: f64,
    #[serde(rename = "d_T_cc")]
    pub d_t_cc: f64,
    #[serde(default = "default_rows")]
    pub grid_rows: usize,
    #[serde(default = "default_cols")]
    pub grid_cols: usize,
}

fn default_rows() -> usize {
    4
}
fn default_cols() -> usize {
    6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitTransform {
    pub scale: f64,
    pub rotation: [[f64; 3]; 3],
    pub origin: [f64; 3],
}

/// Similarity transform bringing a raw cloud to the calibrated frame:
/// p_cal = rotation * (scale * p) - origin.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub origin: Point3<f64>,
    /// When set, origin.z is re-derived from the cloud at apply time as the
    /// 1st percentile of z inside the ROI (the tree base).
    pub resolve_ground: bool,
}

impl Calibration {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            origin: Point3::origin(),
            resolve_ground: false,
        }
    }

    fn oriented(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * (p.coords * self.scale))
    }
}

/// Region-of-interest extents, relative to the re-centered frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoiSpec {
    /// Half-extent of the crop along the row (Y), meters.
    pub half_extent: f64,
    /// Depth of the crop perpendicular to the row (|X| bound), meters.
    pub depth: f64,
    /// Height of the crop above ground (Z bound), meters.
    pub height: f64,
}

impl RoiSpec {
    pub fn validate(&self) -> Result<()> {
        if self.half_extent <= 0.0 || self.depth <= 0.0 || self.height <= 0.0 {
            return Err(OrchardError::ConfigError(
                "roi extents must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Derive the similarity transform from the calibration input.
///
/// For a marker observation: the scale is known metric patch spacing over the
/// observed mean spacing; the rotation maps the chart-plane normal to X, the
/// chart rows to Y (row direction = tree row) and Z completes the
/// right-handed, upward frame. The origin sits d_R_cc behind the chart along
/// +X, d_T_cc along +Y toward the designated tree; its height is resolved
/// against the cloud when the calibration is applied.
pub fn derive_calibration(input: &CalibrationInput) -> Result<Calibration> {
    match input {
        CalibrationInput::Explicit(t) => {
            let rotation = Matrix3::from_iterator(
                (0..3).flat_map(|c| (0..3).map(move |r| t.rotation[r][c])),
            );
            let det = rotation.determinant();
            if (rotation * rotation.transpose() - Matrix3::identity()).abs().max() > 1e-6
                || (det - 1.0).abs() > 1e-6
            {
                return Err(OrchardError::ConfigError(
                    "explicit rotation is not orthonormal".into(),
                ));
            }
            if t.scale <= 0.0 {
                return Err(OrchardError::ConfigError("scale must be positive".into()));
            }
            Ok(Calibration {
                scale: t.scale,
                rotation,
                origin: Point3::new(t.origin[0], t.origin[1], t.origin[2]),
                resolve_ground: false,
            })
        }
        CalibrationInput::Marker(m) => derive_from_marker(m),
    }
}

fn derive_from_marker(m: &MarkerObservation) -> Result<Calibration> {
    let n = m.marker_points.len();
    if n < 4 || n != m.grid_rows * m.grid_cols || m.grid_rows < 2 || m.grid_cols < 2 {
        return Err(OrchardError::ConfigError(format!(
            "marker grid {}x{} does not match {} points",
            m.grid_rows, m.grid_cols, n
        )));
    }
    let pts: Vec<Point3<f64>> = m
        .marker_points
        .iter()
        .map(|p| Point3::new(p[0], p[1], p[2]))
        .collect();
    let at = |i: usize, j: usize| pts[i * m.grid_cols + j];

    // Observed spacing over all grid-adjacent patch pairs.
    let mut spacings = Vec::new();
    for i in 0..m.grid_rows {
        for j in 0..m.grid_cols {
            if j + 1 < m.grid_cols {
                spacings.push((at(i, j + 1) - at(i, j)).norm());
            }
            if i + 1 < m.grid_rows {
                spacings.push((at(i + 1, j) - at(i, j)).norm());
            }
        }
    }
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if mean <= 0.0 {
        return Err(OrchardError::DegenerateMarker);
    }
    let var = spacings.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / spacings.len() as f64;
    if var.sqrt() / mean > 0.1 {
        return Err(OrchardError::MarkerNoiseTooHigh(var.sqrt() / mean));
    }
    let scale = m.patch_spacing_m / mean;

    // Row direction (chart horizontal) and column direction (chart downward).
    let mut v_row = Vector3::zeros();
    let mut v_down = Vector3::zeros();
    for i in 0..m.grid_rows {
        for j in 0..m.grid_cols {
            if j + 1 < m.grid_cols {
                v_row += at(i, j + 1) - at(i, j);
            }
            if i + 1 < m.grid_rows {
                v_down += at(i + 1, j) - at(i, j);
            }
        }
    }
    if v_row.norm() < 1e-12 || v_down.norm() < 1e-12 {
        return Err(OrchardError::DegenerateMarker);
    }
    if v_row.cross(&v_down).norm() / (v_row.norm() * v_down.norm()) < 1e-6 {
        return Err(OrchardError::DegenerateMarker);
    }
    let u_y = Unit::new_normalize(v_row);
    let up = -v_down;
    let u_z = Unit::new_normalize(up - u_y.into_inner() * up.dot(&u_y));
    let u_x = Unit::new_normalize(u_y.cross(&u_z));
    let rotation = Matrix3::from_rows(&[
        u_x.into_inner().transpose(),
        u_y.into_inner().transpose(),
        u_z.into_inner().transpose(),
    ]);

    // Chart center in the oriented, scaled frame.
    let mut centroid = Vector3::zeros();
    for p in &pts {
        centroid += p.coords;
    }
    centroid /= n as f64;
    let c = rotation * (centroid * scale);
    let origin = Point3::new(c.x + m.d_r_cc, c.y + m.d_t_cc, 0.0);
    Ok(Calibration {
        scale,
        rotation,
        origin,
        resolve_ground: true,
    })
}

/// Apply a calibration and crop to the region of interest.
pub fn apply_calibration(
    cloud: &ColorPointCloud,
    calib: &Calibration,
    roi: &RoiSpec,
) -> Result<ColorPointCloud> {
    apply_calibration_indexed(cloud, calib, roi).map(|(c, _)| c)
}

/// As [`apply_calibration`], additionally returning the index of each kept
/// point in the input cloud (sidecar arrays can be cropped alongside).
pub fn apply_calibration_indexed(
    cloud: &ColorPointCloud,
    calib: &Calibration,
    roi: &RoiSpec,
) -> Result<(ColorPointCloud, Vec<usize>)> {
    roi.validate()?;
    if cloud.is_empty() {
        return Err(OrchardError::EmptyInput("apply_calibration"));
    }
    let oriented: Vec<Point3<f64>> = cloud.points.iter().map(|p| calib.oriented(p)).collect();
    let mut origin = calib.origin;
    if calib.resolve_ground {
        // Ground = 1st percentile of z among points inside the x/y ROI.
        let mut zs: Vec<f64> = oriented
            .iter()
            .filter(|q| {
                (q.x - origin.x).abs() <= roi.depth && (q.y - origin.y).abs() <= roi.half_extent
            })
            .map(|q| q.z)
            .collect();
        if zs.is_empty() {
            return Err(OrchardError::EmptyRoi);
        }
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        origin.z = zs[(zs.len() - 1) / 100];
    }
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut kept = Vec::new();
    for (i, (q, c)) in oriented.iter().zip(&cloud.colors).enumerate() {
        let p = Point3::new(q.x - origin.x, q.y - origin.y, q.z - origin.z);
        if p.x.abs() <= roi.depth
            && p.y.abs() <= roi.half_extent
            && p.z >= -GROUND_SLACK_M
            && p.z <= roi.height
        {
            points.push(p);
            colors.push(*c);
            kept.push(i);
        }
    }
    if points.is_empty() {
        return Err(OrchardError::EmptyRoi);
    }
    Ok((ColorPointCloud { points, colors }, kept))
}
