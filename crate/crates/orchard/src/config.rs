//! Pipeline configuration: every tunable constant with its default value,
//! plus a key=value file format with override support.

use serde::{Deserialize, Serialize};

use crate::error::{OrchardError, Result};

/// All tunable constants of the pipeline. Defaults follow the source
/// measurements of the target orchard setup; see the field docs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Voxel edge for every volumetric form, meters (5mm).
    pub voxel_edge: f64,
    /// Tube radius around detected horizontal lines when gathering trellis
    /// points, meters (1cm).
    pub line_tube: f64,
    /// MSAC inlier tolerance for the trellis-plane fit, meters (0.5cm).
    pub plane_tol: f64,
    /// Hough accumulator angle resolution, degrees.
    pub hough_theta_step_deg: f64,
    /// Accumulator peaks must exceed this fraction of the maximum (20%).
    pub hough_peak_frac: f64,
    /// Maximum line angle with the horizontal axis, degrees (10).
    pub hough_max_angle_deg: f64,
    /// Minimum separation when merging horizontal lines into trellis-lines,
    /// meters (30cm).
    pub wire_merge_dist: f64,
    /// Half-width of the search slab around the trellis-plane, meters (5cm).
    pub slab_halfwidth: f64,
    /// Ground histogram cell edge, meters (1cm).
    pub ground_grid: f64,
    /// Non-maximum suppression window on the ground histogram, meters.
    pub nms_window: f64,
    /// A peak must exceed this multiple of the median nonzero bin count.
    pub nms_peak_factor: f64,
    /// Radius of the trunk verification cylinder, meters (15cm).
    pub trunk_cyl_radius: f64,
    /// Minimum main-axis shortest-path length for a verified trunk, meters (1m).
    pub min_trunk_path: f64,
    /// Trunk label distance to the main axis, meters (3cm).
    pub trunk_label_dist: f64,
    /// Radius of the wire-segment search cylinder, meters (10cm).
    pub segment_cyl_radius: f64,
    /// Y offset from trunk locations excluded from wire segments, meters (4cm).
    pub trunk_offset: f64,
    /// Line inlier tolerance at the lowest trellis level, meters (7cm).
    pub wire_tol_low: f64,
    /// Line inlier tolerance at the upper trellis levels, meters (4cm).
    pub wire_tol_high: f64,
    /// Support pole radius, meters (4.5cm).
    pub pole_radius: f64,
    /// Half-width of the pole shell around its radius, meters (0.5cm).
    pub pole_shell_halfwidth: f64,
    /// Height of a pole slice, meters (2cm).
    pub pole_slice: f64,
    /// Support pole height, meters (2.3m).
    pub pole_height: f64,
    /// Shell-to-cylinder point ratio above which a candidate is a pole (0.8).
    pub pole_ratio: f64,
    /// Minimum cylinder points for pole detection to run.
    pub pole_min_points: usize,
    /// Component-to-trunk assignment distance, meters (30cm).
    pub comp_trunk_dist: f64,
    /// Distance ratio gate for floating components (3x).
    pub floating_ratio: f64,
    /// Neighbors used for end-point line fitting of floating components (K=10).
    pub floating_k: usize,
    /// Hue range of green/yellow apples, inclusive.
    pub hue_green: [f64; 2],
    /// Low hue range of red apples, inclusive.
    pub hue_red_low: [f64; 2],
    /// High hue range of red apples, inclusive.
    pub hue_red_high: [f64; 2],
    /// Minimum component size in voxels for an apple detection.
    pub apple_min_voxels: usize,
    /// Optional saturation gate for apple points (disabled by default).
    pub apple_min_saturation: Option<f64>,
    /// Optional value gate for apple points (disabled by default).
    pub apple_min_value: Option<f64>,
    /// Apple match radius against ground truth, meters (10cm).
    pub match_radius: f64,
    /// ICP correspondence rejection radius, meters (10cm).
    pub icp_reject: f64,
    /// ICP iteration cap.
    pub icp_max_iter: usize,
    /// ICP convergence threshold on RMS change, meters.
    pub icp_converge: f64,
    /// Minimum mutual correspondences for ICP to start.
    pub icp_min_corr: usize,
    /// Half-extent of the ROI crop along the row (Y), meters.
    pub roi_half_extent: f64,
    /// ROI crop depth (|X| bound), meters.
    pub roi_depth: f64,
    /// ROI crop height above ground, meters.
    pub roi_height: f64,
    /// Base PRNG seed threaded through all randomized stages.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            voxel_edge: 0.005,
            line_tube: 0.01,
            plane_tol: 0.005,
            hough_theta_step_deg: 0.5,
            hough_peak_frac: 0.2,
            hough_max_angle_deg: 10.0,
            wire_merge_dist: 0.30,
            slab_halfwidth: 0.05,
            ground_grid: 0.01,
            nms_window: 0.15,
            nms_peak_factor: 5.0,
            trunk_cyl_radius: 0.15,
            min_trunk_path: 1.0,
            trunk_label_dist: 0.03,
            segment_cyl_radius: 0.10,
            trunk_offset: 0.04,
            wire_tol_low: 0.07,
            wire_tol_high: 0.04,
            pole_radius: 0.045,
            pole_shell_halfwidth: 0.005,
            pole_slice: 0.02,
            pole_height: 2.3,
            pole_ratio: 0.8,
            pole_min_points: 50,
            comp_trunk_dist: 0.30,
            floating_ratio: 3.0,
            floating_k: 10,
            hue_green: [0.15, 0.2],
            hue_red_low: [0.0, 0.05],
            hue_red_high: [0.95, 1.0],
            apple_min_voxels: 8,
            apple_min_saturation: None,
            apple_min_value: None,
            match_radius: 0.10,
            icp_reject: 0.10,
            icp_max_iter: 100,
            icp_converge: 1e-5,
            icp_min_corr: 100,
            roi_half_extent: 4.0,
            roi_depth: 0.6,
            roi_height: 3.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("voxel_edge", self.voxel_edge),
            ("line_tube", self.line_tube),
            ("plane_tol", self.plane_tol),
            ("hough_theta_step_deg", self.hough_theta_step_deg),
            ("hough_peak_frac", self.hough_peak_frac),
            ("hough_max_angle_deg", self.hough_max_angle_deg),
            ("wire_merge_dist", self.wire_merge_dist),
            ("slab_halfwidth", self.slab_halfwidth),
            ("ground_grid", self.ground_grid),
            ("nms_window", self.nms_window),
            ("nms_peak_factor", self.nms_peak_factor),
            ("trunk_cyl_radius", self.trunk_cyl_radius),
            ("min_trunk_path", self.min_trunk_path),
            ("trunk_label_dist", self.trunk_label_dist),
            ("segment_cyl_radius", self.segment_cyl_radius),
            ("trunk_offset", self.trunk_offset),
            ("wire_tol_low", self.wire_tol_low),
            ("wire_tol_high", self.wire_tol_high),
            ("pole_radius", self.pole_radius),
            ("pole_shell_halfwidth", self.pole_shell_halfwidth),
            ("pole_slice", self.pole_slice),
            ("pole_height", self.pole_height),
            ("pole_ratio", self.pole_ratio),
            ("comp_trunk_dist", self.comp_trunk_dist),
            ("floating_ratio", self.floating_ratio),
            ("match_radius", self.match_radius),
            ("icp_reject", self.icp_reject),
            ("icp_converge", self.icp_converge),
            ("roi_half_extent", self.roi_half_extent),
            ("roi_depth", self.roi_depth),
            ("roi_height", self.roi_height),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(OrchardError::ConfigError(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The ROI crop spec assembled from the roi_* fields.
    pub fn roi(&self) -> crate::calibrate::RoiSpec {
        crate::calibrate::RoiSpec {
            half_extent: self.roi_half_extent,
            depth: self.roi_depth,
            height: self.roi_height,
        }
    }

    /// Parse a key=value config text ('#' starts a comment) over defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    /// Apply key=value overrides onto this config.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                OrchardError::ConfigError(format!("line {}: expected key = value", no + 1))
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| {
                OrchardError::ConfigError(format!("line {}: {e}", no + 1))
            })?;
        }
        self.validate()
    }

    /// Set a single field by name. Ranges take "lo,hi".
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(v: &str) -> Result<f64> {
            v.parse()
                .map_err(|_| OrchardError::ConfigError(format!("bad float '{v}'")))
        }
        fn u(v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| OrchardError::ConfigError(format!("bad integer '{v}'")))
        }
        fn range(v: &str) -> Result<[f64; 2]> {
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| OrchardError::ConfigError(format!("bad range '{v}'")))?;
            Ok([f(a.trim())?, f(b.trim())?])
        }
        match key {
            "voxel_edge" => self.voxel_edge = f(value)?,
            "line_tube" => self.line_tube = f(value)?,
            "plane_tol" => self.plane_tol = f(value)?,
            "hough_theta_step_deg" => self.hough_theta_step_deg = f(value)?,
            "hough_peak_frac" => self.hough_peak_frac = f(value)?,
            "hough_max_angle_deg" => self.hough_max_angle_deg = f(value)?,
            "wire_merge_dist" => self.wire_merge_dist = f(value)?,
            "slab_halfwidth" => self.slab_halfwidth = f(value)?,
            "ground_grid" => self.ground_grid = f(value)?,
            "nms_window" => self.nms_window = f(value)?,
            "nms_peak_factor" => self.nms_peak_factor = f(value)?,
            "trunk_cyl_radius" => self.trunk_cyl_radius = f(value)?,
            "min_trunk_path" => self.min_trunk_path = f(value)?,
            "trunk_label_dist" => self.trunk_label_dist = f(value)?,
            "segment_cyl_radius" => self.segment_cyl_radius = f(value)?,
            "trunk_offset" => self.trunk_offset = f(value)?,
            "wire_tol_low" => self.wire_tol_low = f(value)?,
            "wire_tol_high" => self.wire_tol_high = f(value)?,
            "pole_radius" => self.pole_radius = f(value)?,
            "pole_shell_halfwidth" => self.pole_shell_halfwidth = f(value)?,
            "pole_slice" => self.pole_slice = f(value)?,
            "pole_height" => self.pole_height = f(value)?,
            "pole_ratio" => self.pole_ratio = f(value)?,
            "pole_min_points" => self.pole_min_points = u(value)?,
            "comp_trunk_dist" => self.comp_trunk_dist = f(value)?,
            "floating_ratio" => self.floating_ratio = f(value)?,
            "floating_k" => self.floating_k = u(value)?,
            "hue_green" => self.hue_green = range(value)?,
            "hue_red_low" => self.hue_red_low = range(value)?,
            "hue_red_high" => self.hue_red_high = range(value)?,
            "apple_min_voxels" => self.apple_min_voxels = u(value)?,
            "apple_min_saturation" => self.apple_min_saturation = Some(f(value)?),
            "apple_min_value" => self.apple_min_value = Some(f(value)?),
            "match_radius" => self.match_radius = f(value)?,
            "icp_reject" => self.icp_reject = f(value)?,
            "icp_max_iter" => self.icp_max_iter = u(value)?,
            "icp_converge" => self.icp_converge = f(value)?,
            "icp_min_corr" => self.icp_min_corr = u(value)?,
            "roi_half_extent" => self.roi_half_extent = f(value)?,
            "roi_depth" => self.roi_depth = f(value)?,
            "roi_height" => self.roi_height = f(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| OrchardError::ConfigError(format!("bad seed '{value}'")))?
            }
            other => {
                return Err(OrchardError::ConfigError(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every default constant pinned to its documented value.
    #[test]
    fn default_constants_self_test() {
        let c = PipelineConfig::default();
        assert_eq!(c.voxel_edge, 0.005);
        assert_eq!(c.line_tube, 0.01);
        assert_eq!(c.plane_tol, 0.005);
        assert_eq!(c.hough_peak_frac, 0.2);
        assert_eq!(c.hough_max_angle_deg, 10.0);
        assert_eq!(c.wire_merge_dist, 0.30);
        assert_eq!(c.slab_halfwidth, 0.05);
        assert_eq!(c.ground_grid, 0.01);
        assert_eq!(c.trunk_cyl_radius, 0.15);
        assert_eq!(c.min_trunk_path, 1.0);
        assert_eq!(c.trunk_label_dist, 0.03);
        assert_eq!(c.segment_cyl_radius, 0.10);
        assert_eq!(c.trunk_offset, 0.04);
        assert_eq!(c.wire_tol_low, 0.07);
        assert_eq!(c.wire_tol_high, 0.04);
        assert_eq!(c.pole_radius, 0.045);
        assert_eq!(c.pole_shell_halfwidth, 0.005);
        assert_eq!(c.pole_slice, 0.02);
        assert_eq!(c.pole_height, 2.3);
        assert_eq!(c.pole_ratio, 0.8);
        assert_eq!(c.comp_trunk_dist, 0.30);
        assert_eq!(c.floating_ratio, 3.0);
        assert_eq!(c.floating_k, 10);
        assert_eq!(c.hue_green, [0.15, 0.2]);
        assert_eq!(c.hue_red_low, [0.0, 0.05]);
        assert_eq!(c.hue_red_high, [0.95, 1.0]);
        assert_eq!(c.match_radius, 0.10);
        assert!(c.apple_min_saturation.is_none());
        assert!(c.apple_min_value.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn kv_text_overrides() {
        let text = "voxel_edge = 0.01  # coarser\nseed = 42\nhue_green = 0.1, 0.3\n";
        let c = PipelineConfig::from_kv_text(text).unwrap();
        assert_eq!(c.voxel_edge, 0.01);
        assert_eq!(c.seed, 42);
        assert_eq!(c.hue_green, [0.1, 0.3]);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(PipelineConfig::from_kv_text("nope = 1\n").is_err());
    }

    #[test]
    fn nonpositive_rejected() {
        assert!(PipelineConfig::from_kv_text("voxel_edge = 0\n").is_err());
    }
}
