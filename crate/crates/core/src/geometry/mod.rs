//! Clothoid curves, arc-length parameterised paths and reference tables.

mod clothoid;
mod path;
pub mod quadrature;
mod reftable;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use clothoid::{fit_clothoid, point_at, ClothoidSegment};
pub use path::{concat_path, curvature_at, ArcPath};
pub use reftable::{nearest_index, sample_reftable, RefRow, RefTable};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar pose in the spatial frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Expresses a world point in this pose's body frame (x forward, y left).
    pub fn to_body(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.x;
        let dy = y - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Inverse of [`Pose2D::to_body`].
    pub fn to_world(&self, bx: f64, by: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * bx - s * by, self.y + s * bx + c * by)
    }

    /// Expresses `other` relative to this pose.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let (bx, by) = self.to_body(other.x, other.y);
        Pose2D::new(bx, by, other.theta - self.theta)
    }
}
