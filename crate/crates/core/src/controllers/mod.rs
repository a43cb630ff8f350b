//! Benchmark controllers: PD on the image centroid, pure pursuit, a
//! linearised MPC fed by ground truth or a lane fit, and an oracle follower.

mod actors;
mod lane_fit;
mod nmpc;

use serde::{Deserialize, Serialize};

pub use actors::{
    ControllerConfig, ControllerKind, NmpcActor, OracleActor, PdActor, PurePursuitActor,
    ReferenceSource, ZeroActor,
};
pub use lane_fit::lane_fit_waypoints;

pub use nmpc::{nmpc_solve, nmpc_step, MPCConfig, MpcSolution};

use crate::robot::{BodyTwist, OMEGA_MAX, V_MAX, V_MIN};
use crate::sensor::{centroid_offset, BinaryImage};
use crate::tracking::{action_penalties, RewardWeights};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PDGains {
    pub kp: f64,
    pub kd: f64,
    pub v_ref: f64,
}

impl Default for PDGains {
    fn default() -> Self {
        PDGains {
            kp: 1.2,
            kd: 0.1,
            v_ref: 0.75,
        }
    }
}

impl PDGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.kd.is_finite()) {
            return Err(Error::domain("PD gains must be finite"));
        }
        if !(V_MIN..=V_MAX).contains(&self.v_ref) {
            return Err(Error::domain(format!(
                "PD v_ref {} outside [0.1, 1]",
                self.v_ref
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PurePursuitConfig {
    pub lookahead_l: f64,
    pub v_fixed: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        PurePursuitConfig {
            lookahead_l: 1.5,
            v_fixed: 0.75,
        }
    }
}

impl PurePursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lookahead_l > 0.0) {
            return Err(Error::domain("pure pursuit look-ahead must be positive"));
        }
        if !self.v_fixed.is_finite() {
            return Err(Error::domain("pure pursuit speed must be finite"));
        }
        Ok(())
    }
}

/// `v = v_ref`, `ω = clamp(kp·e + kd·(e − e_prev)/dt, ±0.5)`.
///
/// `e` comes from [`pd_error`]: negative when the marker centroid lies left
/// of centre, so positive gains steer away from the nearer boundary.
pub fn pd_center(e_c: f64, e_c_prev: f64, dt: f64, gains: &PDGains) -> Result<BodyTwist> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step {dt} must be positive")));
    }
    let omega = gains.kp * e_c + gains.kd * (e_c - e_c_prev) / dt;
    Ok(BodyTwist::new(
        gains.v_ref,
        omega.clamp(-OMEGA_MAX, OMEGA_MAX),
    ))
}

/// Signed centring error `(u_c − c)/c`, `c = (W−1)/2`; `None` for an empty
/// image.
pub fn pd_error(img: &BinaryImage) -> Option<f64> {
    centroid_offset(img).map(|e| -e)
}

/// Arc through a body-frame goal: `ω = 2·v·sin(α)/L`, `α = atan2(y, x)`.
/// A goal at or behind the robot gets a saturated turn toward its side.
pub fn pure_pursuit(goal_body: (f64, f64), v: f64, l: f64) -> Result<BodyTwist> {
    if !(l > 0.0) {
        return Err(Error::domain("pure pursuit look-ahead must be positive"));
    }
    let (x, y) = goal_body;
    if x <= 0.0 {
        let turn = if y < 0.0 { -OMEGA_MAX } else { OMEGA_MAX };
        return Ok(BodyTwist::new(v, turn));
    }
    let alpha = y.atan2(x);
    let omega = 2.0 * v * alpha.sin() / l;
    Ok(BodyTwist::new(v, omega.clamp(-OMEGA_MAX, OMEGA_MAX)))
}

/// `(1−e_c)² + (1−e_V)² + (1−e_a1)² + (1−e_a2)²`, in `[0, 4]`.
pub fn icg_reward(e_c: f64, e_v: f64, action: &BodyTwist, weights: &RewardWeights) -> f64 {
    let (a1, a2) = action_penalties(action, weights);
    let sq = |e: f64| (1.0 - e.clamp(0.0, 1.0)).powi(2);
    sq(e_c) + sq(e_v) + sq(a1) + sq(a2)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn pd_examples() {
        let g = PDGains {
            kp: 1.0,
            kd: 0.0,
            v_ref: 0.5,
        };
        assert_eq!(
            pd_center(0.0, 0.0, 0.05, &g).unwrap(),
            BodyTwist::new(0.5, 0.0)
        );
        assert_eq!(pd_center(0.5, 0.5, 0.05, &g).unwrap().omega, 0.5);
        let g2 = PDGains { kp: 2.0, ..g };
        assert_eq!(pd_center(1.0, 1.0, 0.05, &g2).unwrap().omega, 0.5);
        assert_eq!(pd_center(-1.0, -1.0, 0.05, &g2).unwrap().omega, -0.5);
        let g3 = PDGains {
            kp: 0.0,
            kd: 0.01,
            v_ref: 0.5,
        };
        assert!((pd_center(0.2, 0.1, 0.05, &g3).unwrap().omega - 0.02).abs() < 1e-12);
        assert!(pd_center(0.0, 0.0, 0.0, &g).is_err());
    }

    #[test]
    fn pd_error_sign() {
        let left = BinaryImage::from_fn(|u, v| (u < 40 && v > 50) as u8 as f32);
        assert!(pd_error(&left).unwrap() < 0.0);
        let right = BinaryImage::from_fn(|u, _| (u > 300) as u8 as f32);
        assert!(pd_error(&right).unwrap() > 0.0);
        assert!(pd_error(&BinaryImage::zeros()).is_none());
    }

    #[test]
    fn pure_pursuit_examples() {
        assert_eq!(pure_pursuit((2.0, 0.0), 0.75, 1.5).unwrap().omega, 0.0);
        let a = 30f64.to_radians();
        assert_eq!(
            pure_pursuit((a.cos(), a.sin()), 0.75, 1.0).unwrap().omega,
            0.5
        );
        let w = pure_pursuit((1e-12, 1.0), 0.25, 1.0).unwrap().omega;
        assert!((w - 0.5).abs() < 1e-9);
        assert_eq!(pure_pursuit((-1.0, -0.2), 0.5, 1.0).unwrap().omega, -0.5);
        assert_eq!(pure_pursuit((-1.0, 0.2), 0.5, 1.0).unwrap().omega, 0.5);
        assert!(pure_pursuit((1.0, 0.0), 0.5, 0.0).is_err());
    }

    #[test]
    fn icg_examples() {
        let w = RewardWeights::default();
        assert_eq!(icg_reward(0.0, 0.0, &BodyTwist::default(), &w), 4.0);
        assert_eq!(icg_reward(1.0, 1.0, &BodyTwist::new(1.0, 0.5), &w), 0.0);
        assert_eq!(icg_reward(0.5, 0.0, &BodyTwist::default(), &w), 3.25);
    }

    proptest! {
        #[test]
        fn pure_pursuit_curvature_independent_of_speed(
            x in 0.1f64..5.0, y in -2.0f64..2.0, v in 0.05f64..1.0, l in 0.5f64..3.0
        ) {
            let t = pure_pursuit((x, y), v, l).unwrap();
            let expected = 2.0 * y.atan2(x).sin() / l;
            if (v * expected).abs() < OMEGA_MAX {
                prop_assert!((t.omega / v - expected).abs() < 1e-12);
            }
            prop_assert!(t.omega.abs() <= OMEGA_MAX);
        }

        #[test]
        fn pd_output_in_box(e in -1.0f64..1.0, ep in -1.0f64..1.0, kp in -5.0f64..5.0, kd in -5.0f64..5.0) {
            let t = pd_center(e, ep, 0.05, &PDGains { kp, kd, v_ref: 0.6 }).unwrap();
            prop_assert!(t.omega.abs() <= OMEGA_MAX);
            prop_assert_eq!(t.v, 0.6);
        }

        #[test]
        fn icg_in_bounds(ec in 0.0f64..1.0, ev in -1.0f64..2.0, v in -2.0f64..2.0, w in -2.0f64..2.0) {
            let r = icg_reward(ec, ev, &BodyTwist::new(v, w), &RewardWeights::default());
            prop_assert!((0.0..=4.0).contains(&r));
        }
    }
}
