//! Quadratic lane-boundary fit in the image, mapped to body-frame
//! waypoints through the ground homography.

use nalgebra::{DMatrix, DVector};

use crate::geometry::Pose2D;
use crate::sensor::{ground_homography, BinaryImage, CameraModel, IMAGE_W};
use crate::{Error, Result};

/// Least-squares polynomial `y ≈ Σ c_i x^i` of degree at most `deg`,
/// lowered when there are too few distinct abscissae.
fn polyfit(xs: &[f64], ys: &[f64], deg: usize) -> Option<Vec<f64>> {
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.is_empty() {
        return None;
    }
    let deg = deg.min(distinct.len() - 1);
    // Centre and scale the abscissa for conditioning.
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let scale = xs
        .iter()
        .map(|x| (x - mean).abs())
        .fold(0.0, f64::max)
        .max(1e-9);
    let a = DMatrix::from_fn(xs.len(), deg + 1, |i, j| {
        ((xs[i] - mean) / scale).powi(j as i32)
    });
    let b = DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    // Expand back to powers of the raw abscissa.
    let mut coeffs = vec![0.0; deg + 1];
    for (j, c) in sol.iter().enumerate() {
        // c·((x − m)/s)^j = c/s^j · Σ binom(j,i) x^i (−m)^{j−i}
        let f = c / scale.powi(j as i32);
        let mut binom = 1.0;
        for (i, out) in coeffs.iter_mut().enumerate().take(j + 1) {
            *out += f * binom * (-mean).powi((j - i) as i32);
            binom = binom * (j - i) as f64 / (i + 1) as f64;
        }
    }
    Some(coeffs)
}

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn polyder(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &k)| acc * x + i as f64 * k)
}

struct Side {
    us: Vec<f64>,
    vs: Vec<f64>,
}

impl Side {
    fn row_range(&self) -> (f64, f64) {
        let lo = self.vs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn fit(&self) -> Option<Vec<f64>> {
        polyfit(&self.vs, &self.us, 2)
    }
}

/// Body-frame centre-line waypoints at arc spacing `spacing`, starting one
/// spacing ahead of the robot.
///
/// Active pixels are split about the image's vertical axis; each side gets a
/// quadratic `u = f(v)`, the centre curve is their pointwise mean. With fewer
/// than three pixels on one side the visible boundary is offset by half of
/// `lane_width` instead.
pub fn lane_fit_waypoints(
    img: &BinaryImage,
    cam: &CameraModel,
    horizon_n: usize,
    spacing: f64,
    lane_width: f64,
) -> Result<Vec<Pose2D>> {
    if img.active_count() == 0 {
        return Err(Error::NoReference);
    }
    if img.active_count() < 6 {
        return Err(Error::domain("lane fit needs at least 6 active pixels"));
    }
    if !(spacing > 0.0) || horizon_n == 0 {
        return Err(Error::domain("waypoint spacing and count must be positive"));
    }
    let mapping = ground_homography(cam)?;
    let mut left = Side {
        us: vec![],
        vs: vec![],
    };
    let mut right = Side {
        us: vec![],
        vs: vec![],
    };
    for &i in img.support() {
        let (u, v) = ((i as usize % IMAGE_W) as f64, (i as usize / IMAGE_W) as f64);
        let side = if u < cam.u0 { &mut left } else { &mut right };
        side.us.push(u);
        side.vs.push(v);
    }

    let mut ground: Vec<(f64, f64)> = Vec::new();
    if left.us.len() >= 3 && right.us.len() >= 3 {
        let (fl, fr) = (
            left.fit().ok_or(Error::NoReference)?,
            right.fit().ok_or(Error::NoReference)?,
        );
        let (l0, l1) = left.row_range();
        let (r0, r1) = right.row_range();
        let (mut lo, mut hi) = (l0.max(r0), l1.min(r1));
        if lo > hi {
            (lo, hi) = (l0.min(r0), l1.max(r1));
        }
        let mut v = lo;
        while v <= hi {
            let u = 0.5 * (polyval(&fl, v) + polyval(&fr, v));
            if let Ok(p) = mapping.image_to_ground(u, v) {
                ground.push(p);
            }
            v += 1.0;
        }
    } else {
        let (side, toward) = if left.us.len() >= right.us.len() {
            (&left, -1.0)
        } else {
            (&right, 1.0)
        };
        let f = side.fit().ok_or(Error::NoReference)?;
        let (lo, hi) = side.row_range();
        let mut boundary = Vec::new();
        let mut v = lo;
        while v <= hi {
            if let Ok(p) = mapping.image_to_ground(polyval(&f, v), v) {
                boundary.push(p);
            }
            v += 1.0;
        }
        if boundary.len() < 2 {
            return Err(Error::NoReference);
        }
        let xs: Vec<f64> = boundary.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = boundary.iter().map(|p| p.1).collect();
        let c = polyfit(&xs, &ys, 2).ok_or(Error::NoReference)?;
        for &(x, y) in &boundary {
            let slope = polyder(&c, x);
            let norm = (1.0 + slope * slope).sqrt();
            // Left normal of a forward-running curve is (−y', 1)/‖·‖.
            let (nx, ny) = (-slope / norm, 1.0 / norm);
            let off = toward * 0.5 * lane_width;
            ground.push((x + off * nx, y + off * ny));
        }
    }
    if ground.len() < 2 {
        return Err(Error::NoReference);
    }

    let xs: Vec<f64> = ground.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = ground.iter().map(|p| p.1).collect();
    let c = polyfit(&xs, &ys, 2).ok_or(Error::NoReference)?;

    // March along y = p(x) from the robot, emitting a pose every `spacing`.
    let h = (spacing / 50.0).min(1e-3);
    let mut out = Vec::with_capacity(horizon_n);
    let (mut x, mut arc, mut next) = (0.0f64, 0.0f64, spacing);
    let mut y = polyval(&c, x);
    let max_steps = ((horizon_n as f64 + 1.0) * spacing / h) as usize * 4 + 16;
    for _ in 0..max_steps {
        if out.len() == horizon_n {
            break;
        }
        let x1 = x + h;
        let y1 = polyval(&c, x1);
        let d = (x1 - x).hypot(y1 - y);
        if arc + d >= next {
            let f = (next - arc) / d;
            let (px, py) = (x + f * (x1 - x), y + f * (y1 - y));
            out.push(Pose2D::new(px, py, polyder(&c, px).atan()));
            next += spacing;
        }
        arc += d;
        x = x1;
        y = y1;
    }
    Ok(out)
}
