//! Color-threshold apple detection on the calibrated harvest cloud.

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::ColorPointCloud;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::voxel::{connected_components, voxelize};

/// Which of the paper's hue windows a detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarietyHint {
    RedRange,
    GreenYellowRange,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectedApple {
    pub location: [f64; 3],
    pub variety: VarietyHint,
    pub voxel_count: usize,
}

impl DetectedApple {
    pub fn point(&self) -> Point3<f64> {
        Point3::new(self.location[0], self.location[1], self.location[2])
    }
}

/// Standard hexcone RGB→HSV. All channels in [0,255]; h ∈ [0,1) with red at
/// 0, achromatic pixels report h = 0 by convention.
pub fn rgb_to_hsv(color: [u8; 3]) -> (f64, f64, f64) {
    let r = color[0] as f64 / 255.0;
    let g = color[1] as f64 / 255.0;
    let b = color[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return (0.0, s, v);
    }
    let h6 = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = h6 / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    (h, s, v)
}

/// Inverse hexcone conversion, quantized to 8-bit channels.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Inclusive hue-window test; returns the matching window if any.
pub fn hue_window(cfg: &PipelineConfig, color: [u8; 3]) -> Option<VarietyHint> {
    let (h, s, v) = rgb_to_hsv(color);
    if let Some(s_min) = cfg.apple_min_saturation {
        if s < s_min {
            return None;
        }
    }
    if let Some(v_min) = cfg.apple_min_value {
        if v < v_min {
            return None;
        }
    }
    let in_range = |r: [f64; 2]| h >= r[0] && h <= r[1];
    if in_range(cfg.hue_red_low) || in_range(cfg.hue_red_high) {
        Some(VarietyHint::RedRange)
    } else if in_range(cfg.hue_green) {
        Some(VarietyHint::GreenYellowRange)
    } else {
        None
    }
}

/// Hue-filter the harvest cloud, voxelize, take 26-connected components and
/// report each surviving component's bounding-box center.
pub fn detect_apples(harvest: &ColorPointCloud, cfg: &PipelineConfig) -> Result<Vec<DetectedApple>> {
    let hints: Vec<Option<VarietyHint>> = harvest
        .colors
        .par_iter()
        .map(|&c| hue_window(cfg, c))
        .collect();
    let keep: Vec<usize> = (0..harvest.len()).filter(|&i| hints[i].is_some()).collect();
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let sub = harvest.select(&keep);
    let grid = voxelize(&sub, cfg.voxel_edge)?;
    let comps = connected_components(grid.occupied());
    // Majority variety per component, decided from voxel membership.
    let mut out = Vec::new();
    for comp in comps {
        if comp.len() < cfg.apple_min_voxels {
            continue;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in &comp {
            let c = grid.voxel_center(v);
            for (k, x) in [c.x, c.y, c.z].into_iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        let center = [
            (lo[0] + hi[0]) / 2.0,
            (lo[1] + hi[1]) / 2.0,
            (lo[2] + hi[2]) / 2.0,
        ];
        let comp_set: std::collections::HashSet<crate::voxel::Voxel> =
            comp.iter().copied().collect();
        let mut red = 0usize;
        let mut green = 0usize;
        for (si, &gi) in keep.iter().enumerate() {
            if comp_set.contains(&grid.bin_of(&sub.points[si])) {
                match hints[gi] {
                    Some(VarietyHint::RedRange) => red += 1,
                    Some(VarietyHint::GreenYellowRange) => green += 1,
                    None => {}
                }
            }
        }
        let variety = if red >= green {
            VarietyHint::RedRange
        } else {
            VarietyHint::GreenYellowRange
        };
        out.push(DetectedApple {
            location: center,
            variety,
            voxel_count: comp.len(),
        });
    }
    // Stable report order: ascending (y, z, x).
    out.sort_by(|a, b| {
        (a.location[1], a.location[2], a.location[0])
            .partial_cmp(&(b.location[1], b.location[2], b.location[0]))
            .unwrap()
    });
    Ok(out)
}
