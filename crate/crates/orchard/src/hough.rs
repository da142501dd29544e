//! 2D Hough transform for near-horizontal line detection in binary images.

/// A detected line in normal form: rho = u*cos(theta) + v*sin(theta),
/// with (u, v) pixel coordinates and theta in radians.
#[derive(Debug, Clone, Copy)]
pub struct HoughLine {
    pub theta: f64,
    pub rho: f64,
    pub votes: u32,
}

impl HoughLine {
    /// Unit direction of the line in (u, v) pixel space.
    pub fn direction(&self) -> (f64, f64) {
        (-self.theta.sin(), self.theta.cos())
    }

    /// Angle between the line and the horizontal (u) axis, degrees in [0, 90].
    pub fn angle_from_horizontal_deg(&self) -> f64 {
        let (du, dv) = self.direction();
        dv.abs().atan2(du.abs()).to_degrees()
    }

    pub fn distance_to(&self, u: f64, v: f64) -> f64 {
        (u * self.theta.cos() + v * self.theta.sin() - self.rho).abs()
    }
}

/// Vote accumulator for the given pixels. rho resolution is 1 pixel,
/// theta resolution `theta_step_deg`. Returns (accumulator, n_theta, n_rho,
/// rho_offset); bin (t, r) is at t * n_rho + r.
pub fn accumulate(
    pixels: &[(i32, i32)],
    theta_step_deg: f64,
) -> (Vec<u32>, usize, usize, i32) {
    let n_theta = (180.0 / theta_step_deg).round() as usize;
    let rho_max = pixels
        .iter()
        .map(|&(u, v)| ((u * u + v * v) as f64).sqrt())
        .fold(0.0f64, f64::max)
        .ceil() as i32
        + 1;
    let n_rho = (2 * rho_max + 1) as usize;
    let mut acc = vec![0u32; n_theta * n_rho];
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| {
            let th = (t as f64 * theta_step_deg).to_radians();
            (th.cos(), th.sin())
        })
        .collect();
    for &(u, v) in pixels {
        for (t, &(c, s)) in trig.iter().enumerate() {
            let rho = (u as f64 * c + v as f64 * s).round() as i32;
            acc[t * n_rho + (rho + rho_max) as usize] += 1;
        }
    }
    (acc, n_theta, n_rho, rho_max)
}

/// Peaks above `peak_frac` of the accumulator maximum whose line makes an
/// angle below `max_angle_deg` with the horizontal axis. Non-maximum
/// suppression removes secondary peaks within +-5 bins in theta and rho.
pub fn find_lines(
    pixels: &[(i32, i32)],
    theta_step_deg: f64,
    peak_frac: f64,
    max_angle_deg: f64,
) -> Vec<HoughLine> {
    if pixels.is_empty() {
        return Vec::new();
    }
    let (acc, n_theta, n_rho, rho_max) = accumulate(pixels, theta_step_deg);
    let max_votes = *acc.iter().max().unwrap();
    if max_votes == 0 {
        return Vec::new();
    }
    let threshold = (peak_frac * max_votes as f64).max(2.0);
    let mut cells: Vec<(u32, usize, usize)> = Vec::new();
    for t in 0..n_theta {
        for r in 0..n_rho {
            let v = acc[t * n_rho + r];
            if v as f64 > threshold {
                cells.push((v, t, r));
            }
        }
    }
    // Deterministic NMS: strongest first, index order breaks vote ties.
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    const WIN: i64 = 5;
    let mut kept: Vec<(u32, usize, usize)> = Vec::new();
    'next: for cell in cells {
        for k in &kept {
            let dt = (cell.1 as i64 - k.1 as i64).abs();
            // theta wraps at 180 degrees with rho negation; treat the wrap
            // distance conservatively.
            let dt = dt.min(n_theta as i64 - dt);
            if dt <= WIN && (cell.2 as i64 - k.2 as i64).abs() <= WIN {
                continue 'next;
            }
        }
        kept.push(cell);
    }
    kept.into_iter()
        .map(|(votes, t, r)| HoughLine {
            theta: (t as f64 * theta_step_deg).to_radians(),
            rho: (r as i32 - rho_max) as f64,
            votes,
        })
        .filter(|l| l.angle_from_horizontal_deg() < max_angle_deg)
        .collect()
}
