use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::{wrap_angle, Pose2D};
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-13;
const MAX_NEWTON: usize = 100;
const ROOT_TOL: f64 = 1e-13;

/// A curve whose curvature varies linearly with arc length:
/// `κ(s) = kappa0 + kappa_rate·s` for `s ∈ [0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClothoidSegment {
    pub start: Pose2D,
    pub kappa0: f64,
    pub kappa_rate: f64,
    pub length: f64,
}

impl ClothoidSegment {
    pub fn new(start: Pose2D, kappa0: f64, kappa_rate: f64, length: f64) -> Result<Self> {
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::domain(format!(
                "segment length {length} must be finite and >= 0"
            )));
        }
        Ok(ClothoidSegment {
            start,
            kappa0,
            kappa_rate,
            length,
        })
    }

    /// Heading at local arc length `s` (unwrapped).
    pub fn heading(&self, s: f64) -> f64 {
        self.start.theta + self.kappa0 * s + 0.5 * self.kappa_rate * s * s
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.kappa0 + self.kappa_rate * s
    }

    pub fn end(&self) -> Pose2D {
        evaluate(self, self.length)
    }
}

/// Pose at local arc length `s` along the segment.
pub fn point_at(seg: &ClothoidSegment, s: f64) -> Result<Pose2D> {
    if !(s >= 0.0 && s <= seg.length) {
        return Err(Error::domain(format!(
            "arc length {s} outside segment [0, {}]",
            seg.length
        )));
    }
    Ok(evaluate(seg, s))
}

pub(crate) fn evaluate(seg: &ClothoidSegment, s: f64) -> Pose2D {
    if s == 0.0 {
        return seg.start;
    }
    let [dx, dy] = integrate(
        |u| {
            let (sn, cs) = seg.heading(u).sin_cos();
            [cs, sn]
        },
        0.0,
        s,
        QUAD_TOL,
    );
    Pose2D::new(seg.start.x + dx, seg.start.y + dy, seg.heading(s))
}

/// `∫₀¹ (cos, sin)(φ₀ + (δ−A)t + At²) dt` and the A-derivative of the sine part.
fn moments(a: f64, delta: f64, phi0: f64) -> (f64, f64, f64) {
    let [c, s, ds] = integrate(
        |t| {
            let (sn, cs) = (phi0 + (delta - a) * t + a * t * t).sin_cos();
            [cs, sn, (t * t - t) * cs]
        },
        0.0,
        1.0,
        QUAD_TOL,
    );
    (c, s, ds)
}

fn initial_guess(phi0: f64, phi1: f64) -> f64 {
    const CF: [f64; 6] = [
        2.989696028701907,
        0.716228953608281,
        -0.458969738821509,
        -0.502821153340377,
        0.261062141752652,
        -0.045854475238709,
    ];
    let x = phi0 / std::f64::consts::PI;
    let y = phi1 / std::f64::consts::PI;
    let xy = x * y;
    let x2 = x * x;
    let y2 = y * y;
    (phi0 + phi1)
        * (CF[0]
            + xy * (CF[1] + xy * CF[2])
            + (CF[3] + xy * CF[4]) * (x2 + y2)
            + CF[5] * (x2 * x2 + y2 * y2))
}

/// G1 Hermite fit: the clothoid leaving `p_start` with its heading and
/// arriving at `p_end` with its heading.
pub fn fit_clothoid(p_start: Pose2D, p_end: Pose2D) -> Result<ClothoidSegment> {
    let dx = p_end.x - p_start.x;
    let dy = p_end.y - p_start.y;
    let chord = dx.hypot(dy);
    if !(chord >= 1e-9) {
        return Err(Error::domain("clothoid endpoints coincide"));
    }
    let phi = dy.atan2(dx);
    let phi0 = wrap_angle(p_start.theta - phi);
    let phi1 = wrap_angle(p_end.theta - phi);
    let delta = phi1 - phi0;

    let guess = initial_guess(phi0, phi1);
    let (a, iterations) = match newton(guess, delta, phi0) {
        Some(found) => found,
        None => bracketed_root(guess, delta, phi0)?,
    };

    let (x, _, _) = moments(a, delta, phi0);
    if !(x > 0.0) {
        return Err(Error::Fit {
            iterations,
            residual: x,
        });
    }
    let length = chord / x;
    Ok(ClothoidSegment {
        start: p_start,
        kappa0: (delta - a) / length,
        kappa_rate: 2.0 * a / (length * length),
        length,
    })
}

fn newton(mut a: f64, delta: f64, phi0: f64) -> Option<(f64, usize)> {
    for it in 0..MAX_NEWTON {
        let (x, g, dg) = moments(a, delta, phi0);
        if g.abs() < ROOT_TOL {
            return (x > 0.0).then_some((a, it));
        }
        if dg == 0.0 || !dg.is_finite() {
            return None;
        }
        let step = g / dg;
        a -= step;
        if !a.is_finite() || a.abs() > 1e4 {
            return None;
        }
    }
    None
}

/// Scans outward from the guess for the nearest sign change of the lateral
/// residual with a positive forward moment, then bisects it.
fn bracketed_root(guess: f64, delta: f64, phi0: f64) -> Result<(f64, usize)> {
    let residual = |a: f64| moments(a, delta, phi0).1;
    let step = 0.05;
    let mut iterations = 0;
    for k in 0..2000 {
        for dir in [1.0, -1.0] {
            let lo = guess + dir * step * k as f64;
            let hi = lo + dir * step;
            let (glo, ghi) = (residual(lo), residual(hi));
            if glo.signum() == ghi.signum() && glo != 0.0 {
                continue;
            }
            let (mut lo, mut hi, mut glo) = (lo, hi, glo);
            for _ in 0..200 {
                iterations += 1;
                let mid = 0.5 * (lo + hi);
                let gm = residual(mid);
                if gm == 0.0 || (hi - lo).abs() < 1e-15 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if gm.signum() == glo.signum() {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let (x, g, _) = moments(root, delta, phi0);
            if x > 0.0 && g.abs() < 1e-10 {
                return Ok((root, iterations));
            }
        }
    }
    Err(Error::Fit {
        iterations: MAX_NEWTON,
        residual: residual(guess).abs(),
    })
}
