//! Skid-steer kinematics: extended differential-drive inverse kinematics,
//! action clamping and exact constant-twist integration.

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::{Error, Result};

pub const V_MIN: f64 = 0.1;
pub const V_MAX: f64 = 1.0;
pub const OMEGA_MAX: f64 = 0.5;

/// Planar body-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTwist {
    pub v: f64,
    pub omega: f64,
}

impl BodyTwist {
    pub fn new(v: f64, omega: f64) -> Self {
        BodyTwist { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

/// Wheel angular rates, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub left: f64,
    pub right: f64,
}

/// Fitted wheel radius and track width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IKParams {
    pub r_hat: f64,
    pub b_hat: f64,
}

impl Default for IKParams {
    fn default() -> Self {
        IKParams {
            r_hat: 0.165,
            b_hat: 0.55,
        }
    }
}

impl IKParams {
    pub fn validate(&self) -> Result<()> {
        if self.r_hat > 0.0 && self.b_hat > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("IK parameters must be positive"))
        }
    }

    /// Box of wheel speeds whose image under the IK map covers the body
    /// action box: the bounding box of the body box's preimage.
    pub fn wheel_box(&self) -> (f64, f64) {
        let half = OMEGA_MAX * self.b_hat / 2.0;
        ((V_MIN - half) / self.r_hat, (V_MAX + half) / self.r_hat)
    }
}

/// Fraction of the commanded motion the robot actually realises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlipModel {
    pub traversal_gain: f64,
    pub omega_gain: f64,
}

impl Default for SlipModel {
    fn default() -> Self {
        SlipModel {
            traversal_gain: 1.0,
            omega_gain: 1.0,
        }
    }
}

impl SlipModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g <= 1.0;
        if ok(self.traversal_gain) && ok(self.omega_gain) {
            Ok(())
        } else {
            Err(Error::domain("slip gains must lie in (0, 1]"))
        }
    }
}

/// A command in either action space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Body(BodyTwist),
    Wheels(WheelSpeeds),
}

impl From<BodyTwist> for Action {
    fn from(t: BodyTwist) -> Self {
        Action::Body(t)
    }
}

impl From<WheelSpeeds> for Action {
    fn from(w: WheelSpeeds) -> Self {
        Action::Wheels(w)
    }
}

impl Action {
    pub fn to_body(&self, p: &IKParams) -> BodyTwist {
        match *self {
            Action::Body(t) => t,
            Action::Wheels(w) => ik_wheel_to_body(w, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub twist: BodyTwist,
    pub wheel: WheelSpeeds,
    pub time: f64,
}

impl RobotState {
    pub fn at(pose: Pose2D) -> Self {
        RobotState {
            pose,
            ..Default::default()
        }
    }
}

/// Body twist from wheel rates, antisymmetric yaw row.
pub fn ik_wheel_to_body(w: WheelSpeeds, p: &IKParams) -> BodyTwist {
    BodyTwist {
        v: p.r_hat * (w.left + w.right) / 2.0,
        omega: p.r_hat * (w.right - w.left) / p.b_hat,
    }
}

pub fn body_to_wheel(t: BodyTwist, p: &IKParams) -> WheelSpeeds {
    let half = t.omega * p.b_hat / 2.0;
    WheelSpeeds {
        left: (t.v - half) / p.r_hat,
        right: (t.v + half) / p.r_hat,
    }
}

/// Projects raw set-points onto `[0.1, 1.0] × [-0.5, 0.5]`.
pub fn clamp_action(raw_v: f64, raw_omega: f64) -> BodyTwist {
    BodyTwist {
        v: raw_v.clamp(V_MIN, V_MAX),
        omega: raw_omega.clamp(-OMEGA_MAX, OMEGA_MAX),
    }
}

pub fn clamp_wheels(w: WheelSpeeds, p: &IKParams) -> WheelSpeeds {
    let (lo, hi) = p.wheel_box();
    WheelSpeeds {
        left: w.left.clamp(lo, hi),
        right: w.right.clamp(lo, hi),
    }
}

/// Pose reached after holding `twist` for `dt` seconds.
pub fn integrate_pose(pose: Pose2D, twist: BodyTwist, dt: f64) -> Pose2D {
    let BodyTwist { v, omega } = twist;
    let th = pose.theta;
    if omega.abs() > 1e-9 {
        let th1 = th + omega * dt;
        let r = v / omega;
        Pose2D::new(
            pose.x + r * (th1.sin() - th.sin()),
            pose.y - r * (th1.cos() - th.cos()),
            th1,
        )
    } else {
        Pose2D::new(pose.x + v * dt * th.cos(), pose.y + v * dt * th.sin(), th)
    }
}

/// Advances the robot by one control period under a constant command.
pub fn step_dynamics(
    state: &RobotState,
    action: Action,
    dt: f64,
    slip: &SlipModel,
    p: &IKParams,
) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step {dt} must be positive")));
    }
    let commanded = action.to_body(p);
    if !commanded.is_finite() {
        return Err(Error::domain("non-finite action"));
    }
    let twist = BodyTwist {
        v: commanded.v * slip.traversal_gain,
        omega: commanded.omega * slip.omega_gain,
    };
    Ok(RobotState {
        pose: integrate_pose(state.pose, twist, dt),
        twist,
        wheel: body_to_wheel(twist, p),
        time: state.time + dt,
    })
}
