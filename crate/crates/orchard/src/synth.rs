//! Seeded procedural generator of winter/harvest trellis-orchard scene pairs
//! with exhaustive ground truth: the test substrate for the whole pipeline.

use nalgebra::{Matrix3, Point3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apples::hsv_to_rgb;
use crate::calibrate::Calibration;
use crate::cloud::ColorPointCloud;
use crate::error::{OrchardError, Result};
use crate::evaluate::GtApple;
use crate::segment::SemanticLabel;

/// Declarative description of one synthetic orchard row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_trees: usize,
    /// Mean along-row trunk spacing (meters).
    pub tree_spacing: f64,
    pub height_min: f64,
    pub height_max: f64,
    /// Trellis wire heights, ascending (meters).
    pub wire_heights: Vec<f64>,
    pub pole: bool,
    pub apples_per_tree: usize,
    /// Isotropic Gaussian noise sigma applied to both clouds (meters).
    pub noise_sigma: f64,
    /// Maximum seasonal branch droop applied to the harvest cloud (meters).
    pub droop: f64,
    /// Target surface sampling step (~1 point per step² of surface).
    pub point_step: f64,
    /// Deliberate cross-tree touching branches.
    pub spanning_bridges: usize,
    /// Detached floating twigs.
    pub floating_twigs: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_trees: 5,
            tree_spacing: 1.0,
            height_min: 1.9,
            height_max: 2.6,
            wire_heights: vec![0.55, 1.05, 1.55, 2.05],
            pole: true,
            apples_per_tree: 12,
            noise_sigma: 0.002,
            droop: 0.04,
            point_step: 0.005,
            spanning_bridges: 1,
            floating_twigs: 2,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(OrchardError::SpecError("n_trees must be >= 1".into()));
        }
        if self.tree_spacing <= 0.0
            || self.height_min <= 0.0
            || self.height_max < self.height_min
            || self.point_step <= 0.0
        {
            return Err(OrchardError::SpecError(
                "dimensions must be positive".into(),
            ));
        }
        if self.wire_heights.is_empty()
            || self.wire_heights.windows(2).any(|w| w[1] <= w[0])
            || self.wire_heights.iter().any(|&h| h <= 0.0)
        {
            return Err(OrchardError::SpecError(
                "wire heights must be positive and ascending".into(),
            ));
        }
        if self.noise_sigma < 0.0 || self.droop < 0.0 {
            return Err(OrchardError::SpecError(
                "noise and droop must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-point ground truth arrays aligned with a generated cloud.
#[derive(Debug, Clone, Default)]
pub struct SceneGt {
    pub semlabel: Vec<SemanticLabel>,
    /// 0 means "no tree" (wires, pipe, pole).
    pub treeid: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub winter: ColorPointCloud,
    pub winter_gt: SceneGt,
    pub harvest: ColorPointCloud,
    pub harvest_gt: SceneGt,
    pub apples: Vec<GtApple>,
    /// Planned trunk base y positions (ascending), centered on the row.
    pub planned_tree_y: Vec<f64>,
    pub pole_y: Option<f64>,
    /// Ground-truth calibration mapping raw to calibrated coordinates.
    pub calibration: Calibration,
}

impl SyntheticScene {
    /// Map a calibrated-frame cloud back to raw (pre-calibration) space:
    /// the inverse of p_cal = R(s·p) − origin.
    pub fn to_raw(&self, cloud: &ColorPointCloud) -> ColorPointCloud {
        let rt = self.calibration.rotation.transpose();
        let points = cloud
            .points
            .iter()
            .map(|p| Point3::from(rt * (p.coords + self.calibration.origin.coords) / self.calibration.scale))
            .collect();
        ColorPointCloud {
            points,
            colors: cloud.colors.clone(),
        }
    }
}

/// One structural sample point before noise: position, droop weight in
/// [0,1], label, tree id and color.
struct Sample {
    p: Point3<f64>,
    droop: f64,
    label: SemanticLabel,
    tree: u32,
    color: [u8; 3],
}

struct Builder {
    samples: Vec<Sample>,
    step: f64,
}

impl Builder {
    /// Sample the surface of a tube around a polyline. `radii` gives the
    /// radius at each polyline vertex; droop weights likewise.
    fn tube(
        &mut self,
        curve: &[Point3<f64>],
        radii: &[f64],
        droops: &[f64],
        label: SemanticLabel,
        tree: u32,
        color: [u8; 3],
    ) {
        for w in 0..curve.len() - 1 {
            let a = curve[w];
            let b = curve[w + 1];
            let seg = b - a;
            let len = seg.norm();
            if len < 1e-12 {
                continue;
            }
            let dir = Unit::new_normalize(seg);
            // Orthonormal ring basis.
            let helper = if dir.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let u = Unit::new_normalize(dir.cross(&helper));
            let v = dir.cross(&u);
            let n_rings = (len / self.step).ceil().max(1.0) as usize;
            for ri in 0..n_rings {
                let t = ri as f64 / n_rings as f64;
                let c = a + seg * t;
                let r = radii[w] + (radii[w + 1] - radii[w]) * t;
                let droop = droops[w] + (droops[w + 1] - droops[w]) * t;
                let n_pts = ((std::f64::consts::TAU * r / self.step).ceil() as usize).max(3);
                for k in 0..n_pts {
                    let phi = k as f64 / n_pts as f64 * std::f64::consts::TAU;
                    let p = c + u.into_inner() * (r * phi.cos()) + v * (r * phi.sin());
                    self.samples.push(Sample {
                        p,
                        droop,
                        label,
                        tree,
                        color,
                    });
                }
            }
        }
    }

    /// Sample a sphere surface via a Fibonacci lattice.
    fn sphere(
        &mut self,
        center: Point3<f64>,
        radius: f64,
        label: SemanticLabel,
        tree: u32,
        color: [u8; 3],
    ) {
        let n = ((4.0 * std::f64::consts::PI * radius * radius) / (self.step * self.step))
            .ceil()
            .max(16.0) as usize;
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let p = center + Vector3::new(r * phi.cos(), r * phi.sin(), z) * radius;
            self.samples.push(Sample {
                p,
                droop: 1.0,
                label,
                tree,
                color,
            });
        }
    }
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    // Box-Muller; one draw per call keeps the stream simple.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn color_in(rng: &mut ChaCha8Rng, h: [f64; 2], s: [f64; 2], v: [f64; 2]) -> [u8; 3] {
    hsv_to_rgb(
        rng.gen_range(h[0]..h[1]),
        rng.gen_range(s[0]..s[1]),
        rng.gen_range(v[0]..v[1]),
    )
}

struct Lateral {
    tree: u32,
    /// Ring samples of the center curve (for hanging apples/leaves/twigs).
    curve: Vec<Point3<f64>>,
}

/// Generate a deterministic winter/harvest scene pair with ground truth.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder {
        samples: Vec::new(),
        step: spec.point_step,
    };

    // Trunk bases centered on the row so the origin sits in the orchard.
    let n = spec.n_trees;
    let planned: Vec<f64> = (0..n)
        .map(|j| {
            (j as f64 - (n as f64 - 1.0) / 2.0) * spec.tree_spacing
                + rng.gen_range(-0.03..0.03)
        })
        .collect();
    let heights: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(spec.height_min..=spec.height_max))
        .collect();

    let y_lo = planned[0] - 0.35;
    let y_hi = planned[n - 1] + 0.35;

    // Trellis wires: thin full-row tubes at each level, plus the water pipe
    // 5cm below the lowest wire.
    let wire_color = |rng: &mut ChaCha8Rng| color_in(rng, [0.52, 0.60], [0.08, 0.2], [0.4, 0.6]);
    for &wz in &spec.wire_heights {
        let c = wire_color(&mut rng);
        let curve = vec![Point3::new(0.0, y_lo, wz), Point3::new(0.0, y_hi, wz)];
        b.tube(
            &curve,
            &[0.002, 0.002],
            &[0.0, 0.0],
            SemanticLabel::TrellisWireWaterPipe,
            0,
            c,
        );
    }
    let pipe_z = spec.wire_heights[0] - 0.05;
    let pipe_color = color_in(&mut rng, [0.52, 0.60], [0.08, 0.2], [0.3, 0.5]);
    b.tube(
        &[Point3::new(0.0, y_lo, pipe_z), Point3::new(0.0, y_hi, pipe_z)],
        &[0.016, 0.016],
        &[0.0, 0.0],
        SemanticLabel::TrellisWireWaterPipe,
        0,
        pipe_color,
    );

    // Support pole halfway between the first two trunks (if any gap exists).
    let pole_y = if spec.pole && n >= 2 {
        Some((planned[0] + planned[1]) / 2.0)
    } else if spec.pole {
        Some(planned[0] + 0.5)
    } else {
        None
    };
    if let Some(py) = pole_y {
        let c = color_in(&mut rng, [0.52, 0.60], [0.05, 0.15], [0.35, 0.55]);
        b.tube(
            &[Point3::new(0.0, py, 0.0), Point3::new(0.0, py, 2.3)],
            &[0.045, 0.045],
            &[0.0, 0.0],
            SemanticLabel::SupportPole,
            0,
            c,
        );
    }

    // Trees: slightly wavering trunk plus arched laterals tied near each
    // wire level, alternating the out-of-plane bow direction.
    let mut laterals: Vec<Lateral> = Vec::new();
    for j in 0..n {
        let tree = j as u32 + 1;
        let yj = planned[j];
        let h = heights[j];
        let ph1 = rng.gen_range(0.0..std::f64::consts::TAU);
        let ph2 = rng.gen_range(0.0..std::f64::consts::TAU);
        let bark = color_in(&mut rng, [0.075, 0.115], [0.4, 0.6], [0.25, 0.45]);

        let n_seg = (h / 0.05).ceil() as usize;
        let trunk: Vec<Point3<f64>> = (0..=n_seg)
            .map(|k| {
                let z = h * k as f64 / n_seg as f64;
                Point3::new(
                    0.010 * (z * 1.3 + ph2).sin(),
                    yj + 0.018 * (z * 2.1 + ph1).sin(),
                    z,
                )
            })
            .collect();
        let radii: Vec<f64> = (0..=n_seg)
            .map(|k| 0.025 - 0.013 * k as f64 / n_seg as f64)
            .collect();
        let droops = vec![0.0; n_seg + 1];
        b.tube(&trunk, &radii, &droops, SemanticLabel::TreeTrunk, tree, bark);

        for (q, &wq) in spec.wire_heights.iter().enumerate() {
            if wq + 0.15 >= h {
                continue;
            }
            for side in [-1.0f64, 1.0] {
                let len = rng.gen_range(0.30..0.36);
                let apex = rng.gen_range(0.08..0.14);
                let bow = if (q as i64 + j as i64) % 2 == 0 { 0.09 } else { -0.09 };
                let n_s = 24;
                let mut curve = Vec::with_capacity(n_s + 1);
                let mut dr = Vec::with_capacity(n_s + 1);
                let mut rr = Vec::with_capacity(n_s + 1);
                for k in 0..=n_s {
                    let s = k as f64 / n_s as f64;
                    let z = wq + apex - (0.30 + apex) * (1.0 - s) * (1.0 - s);
                    curve.push(Point3::new(
                        bow * (std::f64::consts::PI * s).sin(),
                        yj + side * len * s,
                        z,
                    ));
                    dr.push(s); // droop grows toward the tip
                    rr.push(0.012 - 0.006 * s);
                }
                b.tube(&curve, &rr, &dr, SemanticLabel::Branch, tree, bark);
                laterals.push(Lateral { tree, curve });
            }
        }
    }

    // Cross-tree bridges: connect the +y lateral tip of tree j with the -y
    // lateral tip of tree j+1 at a shared wire level.
    let mut bridges = 0usize;
    'bridge: for j in 0..n.saturating_sub(1) {
        if bridges >= spec.spanning_bridges {
            break;
        }
        // Keep the pole's gap clear of bridges when another gap exists, so
        // the pole cylinder stays dominated by pole surface points.
        if pole_y.is_some() && j == 0 && n > 2 {
            continue;
        }
        // Pick matching tips: tree j going +y, tree j+1 going -y, same level.
        for la in &laterals {
            if la.tree != j as u32 + 1 {
                continue;
            }
            let tip_a = *la.curve.last().unwrap();
            if tip_a.y < planned[j] + 0.2 {
                continue; // want the +y side
            }
            for lb in &laterals {
                if lb.tree != j as u32 + 2 {
                    continue;
                }
                let tip_b = *lb.curve.last().unwrap();
                if tip_b.y > planned[j + 1] - 0.2 {
                    continue;
                }
                if (tip_a.z - tip_b.z).abs() > 0.1 {
                    continue;
                }
                let bark = color_in(&mut rng, [0.075, 0.115], [0.4, 0.6], [0.25, 0.45]);
                let n_s = 12;
                for half in 0..2 {
                    let mut curve = Vec::new();
                    for k in 0..=n_s {
                        let t = (half * n_s + k) as f64 / (2 * n_s) as f64;
                        let p = tip_a + (tip_b - tip_a) * t;
                        curve.push(Point3::new(
                            p.x,
                            p.y,
                            p.z + 0.05 * (std::f64::consts::PI * t).sin(),
                        ));
                    }
                    let tree = if half == 0 { j as u32 + 1 } else { j as u32 + 2 };
                    b.tube(
                        &curve,
                        &vec![0.006; n_s + 1],
                        &vec![1.0; n_s + 1],
                        SemanticLabel::Branch,
                        tree,
                        bark,
                    );
                }
                bridges += 1;
                continue 'bridge;
            }
        }
    }

    // Floating twigs: short detached segments 5cm off a mid-lateral point,
    // pointing out of the trellis plane.
    for k in 0..spec.floating_twigs {
        if laterals.is_empty() {
            break;
        }
        let la = &laterals[(k * 7 + 3) % laterals.len()];
        let anchor = la.curve[la.curve.len() * 3 / 5];
        let dir = Vector3::new(1.0, 0.25, 0.35).normalize();
        let start = anchor + dir * 0.05;
        let end = start + dir * rng.gen_range(0.10..0.15);
        let bark = color_in(&mut rng, [0.075, 0.115], [0.4, 0.6], [0.25, 0.45]);
        b.tube(
            &[start, end],
            &[0.005, 0.004],
            &[1.0, 1.0],
            SemanticLabel::Branch,
            la.tree,
            bark,
        );
    }

    // Winter cloud: structural samples plus noise.
    let mut winter = ColorPointCloud::new(Vec::new(), Vec::new());
    let mut winter_gt = SceneGt::default();
    for s in &b.samples {
        winter.points.push(Point3::new(
            s.p.x + normal(&mut rng, spec.noise_sigma),
            s.p.y + normal(&mut rng, spec.noise_sigma),
            s.p.z + normal(&mut rng, spec.noise_sigma),
        ));
        winter.colors.push(s.color);
        winter_gt.semlabel.push(s.label);
        winter_gt.treeid.push(s.tree);
    }

    // Harvest cloud: drooped structure + leaves + apples, fresh noise.
    let mut harvest = ColorPointCloud::new(Vec::new(), Vec::new());
    let mut harvest_gt = SceneGt::default();
    for s in &b.samples {
        let p = Point3::new(s.p.x, s.p.y, s.p.z - spec.droop * s.droop);
        harvest.points.push(Point3::new(
            p.x + normal(&mut rng, spec.noise_sigma),
            p.y + normal(&mut rng, spec.noise_sigma),
            p.z + normal(&mut rng, spec.noise_sigma),
        ));
        harvest.colors.push(s.color);
        harvest_gt.semlabel.push(s.label);
        harvest_gt.treeid.push(s.tree);
    }

    // Leaf speckle along the laterals (hue safely outside apple windows).
    for la in &laterals {
        for (k, c) in la.curve.iter().enumerate() {
            if k % 2 != 0 {
                continue;
            }
            for _ in 0..6 {
                let off = Vector3::new(
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.03),
                );
                let s = k as f64 / (la.curve.len() - 1) as f64;
                let leaf = color_in(&mut rng, [0.23, 0.34], [0.5, 0.9], [0.3, 0.7]);
                harvest.points.push(Point3::new(
                    c.x + off.x + normal(&mut rng, spec.noise_sigma),
                    c.y + off.y + normal(&mut rng, spec.noise_sigma),
                    c.z - spec.droop * s + off.z + normal(&mut rng, spec.noise_sigma),
                ));
                harvest.colors.push(leaf);
                harvest_gt.semlabel.push(SemanticLabel::Branch);
                harvest_gt.treeid.push(la.tree);
            }
        }
    }

    // Apples: spheres hung below drooped lateral points, kept mutually
    // separated so detections stay one-to-one.
    let mut apples: Vec<GtApple> = Vec::new();
    let mut apple_builder = Builder {
        samples: Vec::new(),
        step: spec.point_step,
    };
    for j in 0..n {
        let tree = j as u32 + 1;
        let mine: Vec<&Lateral> = laterals.iter().filter(|l| l.tree == tree).collect();
        if mine.is_empty() {
            continue;
        }
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < spec.apples_per_tree && attempts < spec.apples_per_tree * 40 {
            attempts += 1;
            let la = mine[rng.gen_range(0..mine.len())];
            let ki = rng.gen_range(la.curve.len() / 3..la.curve.len());
            let at = la.curve[ki];
            let s = ki as f64 / (la.curve.len() - 1) as f64;
            let radius = rng.gen_range(0.03..0.04);
            let center = Point3::new(at.x, at.y, at.z - spec.droop * s - radius - 0.012);
            if apples
                .iter()
                .any(|g| (g.point() - center).norm() < 0.14)
            {
                continue;
            }
            let red = rng.gen_bool(0.5);
            let color = if red {
                let h = if rng.gen_bool(0.5) {
                    rng.gen_range(0.005..0.045)
                } else {
                    rng.gen_range(0.955..0.995)
                };
                hsv_to_rgb(h, rng.gen_range(0.7..0.95), rng.gen_range(0.5..0.9))
            } else {
                hsv_to_rgb(
                    rng.gen_range(0.155..0.195),
                    rng.gen_range(0.7..0.95),
                    rng.gen_range(0.5..0.9),
                )
            };
            apple_builder.sphere(center, radius, SemanticLabel::Branch, tree, color);
            apples.push(GtApple {
                x: center.x,
                y: center.y,
                z: center.z,
                tree_id: tree,
            });
            placed += 1;
        }
    }
    for s in &apple_builder.samples {
        harvest.points.push(Point3::new(
            s.p.x + normal(&mut rng, spec.noise_sigma),
            s.p.y + normal(&mut rng, spec.noise_sigma),
            s.p.z + normal(&mut rng, spec.noise_sigma),
        ));
        harvest.colors.push(s.color);
        harvest_gt.semlabel.push(s.label);
        harvest_gt.treeid.push(s.tree);
    }

    // Ground-truth calibration: scenes are generated in the calibrated
    // frame; a fixed nontrivial similarity maps raw scans onto it.
    let angle = 0.4f64;
    let rotation = Matrix3::new(
        angle.cos(),
        -angle.sin(),
        0.0,
        angle.sin(),
        angle.cos(),
        0.0,
        0.0,
        0.0,
        1.0,
    );
    let calibration = Calibration {
        scale: 1.7,
        rotation,
        origin: Point3::new(0.3, -0.2, 0.1),
        resolve_ground: false,
    };

    Ok(SyntheticScene {
        winter,
        winter_gt,
        harvest,
        harvest_gt,
        apples,
        planned_tree_y: planned,
        pole_y,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = SceneSpec {
            n_trees: 3,
            ..SceneSpec::default()
        };
        let a = generate_scene(&spec).unwrap();
        let c = generate_scene(&spec).unwrap();
        assert_eq!(a.winter.len(), c.winter.len());
        for (p, q) in a.winter.points.iter().zip(&c.winter.points) {
            assert_eq!(p, q);
        }
        assert_eq!(a.winter.colors, c.winter.colors);
        for (p, q) in a.harvest.points.iter().zip(&c.harvest.points) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn five_trees_have_full_id_set() {
        let spec = SceneSpec {
            n_trees: 5,
            apples_per_tree: 4,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let ids: std::collections::HashSet<u32> = scene
            .winter_gt
            .treeid
            .iter()
            .copied()
            .filter(|&t| t != 0)
            .collect();
        assert_eq!(ids, (1..=5).collect());
        // Trunk bases within 2cm of plan: check mean trunk-point y at z<10cm.
        for (j, &y) in scene.planned_tree_y.iter().enumerate() {
            let tree = j as u32 + 1;
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for i in 0..scene.winter.len() {
                if scene.winter_gt.treeid[i] == tree
                    && scene.winter_gt.semlabel[i] == SemanticLabel::TreeTrunk
                    && scene.winter.points[i].z < 0.10
                {
                    acc += scene.winter.points[i].y;
                    cnt += 1;
                }
            }
            assert!(cnt > 0);
            assert!((acc / cnt as f64 - y).abs() < 0.02, "tree {tree}");
        }
    }

    #[test]
    fn zero_apples_means_empty_gt() {
        let spec = SceneSpec {
            n_trees: 2,
            apples_per_tree: 0,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        assert!(scene.apples.is_empty());
    }

    #[test]
    fn every_enabled_class_is_nonempty() {
        let scene = generate_scene(&SceneSpec::default()).unwrap();
        for class in [
            SemanticLabel::TreeTrunk,
            SemanticLabel::Branch,
            SemanticLabel::TrellisWireWaterPipe,
            SemanticLabel::SupportPole,
        ] {
            assert!(
                scene.winter_gt.semlabel.iter().any(|&l| l == class),
                "{class:?} missing"
            );
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SceneSpec::default();
        spec.n_trees = 0;
        assert!(matches!(
            generate_scene(&spec),
            Err(OrchardError::SpecError(_))
        ));
        let mut spec = SceneSpec::default();
        spec.wire_heights = vec![1.0, 0.5];
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn raw_round_trip() {
        let spec = SceneSpec {
            n_trees: 2,
            apples_per_tree: 0,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let raw = scene.to_raw(&scene.winter);
        // Re-apply the calibration manually and compare.
        for (r, cal) in raw.points.iter().zip(&scene.winter.points) {
            let back = scene.calibration.rotation * (r.coords * scene.calibration.scale)
                - scene.calibration.origin.coords;
            assert!((back - cal.coords).norm() < 1e-9);
        }
    }

    #[test]
    fn apples_mutually_separated_and_on_their_tree() {
        let scene = generate_scene(&SceneSpec::default()).unwrap();
        assert!(!scene.apples.is_empty());
        for (i, a) in scene.apples.iter().enumerate() {
            for b in &scene.apples[i + 1..] {
                assert!((a.point() - b.point()).norm() >= 0.14);
            }
            let j = a.tree_id as usize - 1;
            assert!(
                (a.y - scene.planned_tree_y[j]).abs() < 0.6,
                "apple far from its tree"
            );
        }
    }
}
