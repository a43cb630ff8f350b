//! Controllers wrapped as episode actors.

use serde::{Deserialize, Serialize};

use super::{
    lane_fit_waypoints, nmpc_solve, pd_center, pd_error, pure_pursuit, MPCConfig, PDGains,
    PurePursuitConfig,
};
use crate::geometry::{curvature_at, Pose2D};
use crate::policy::{LinearPolicy, PolicyActor};
use crate::robot::{Action, BodyTwist, OMEGA_MAX};
use crate::tracking::{Actor, Observation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Pd,
    PurePursuit,
    Nmpc,
    Policy,
    Oracle,
    Zero,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Pd => "pd",
            ControllerKind::PurePursuit => "pure_pursuit",
            ControllerKind::Nmpc => "nmpc",
            ControllerKind::Policy => "policy",
            ControllerKind::Oracle => "oracle",
            ControllerKind::Zero => "zero",
        }
    }
}

/// Where pure pursuit and MPC take their reference from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// The episode's reference path.
    #[default]
    GroundTruth,
    /// Lane fit on the camera image.
    Vision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub reference: ReferenceSource,
    pub pd: PDGains,
    pub pure_pursuit: PurePursuitConfig,
    pub nmpc: MPCConfig,
    /// Consecutive MPC failures tolerated before the run aborts.
    pub max_infeasible: usize,
    /// Lane width assumed by the single-boundary lane fit.
    pub lane_width: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kind: ControllerKind::Pd,
            reference: ReferenceSource::GroundTruth,
            pd: PDGains::default(),
            pure_pursuit: PurePursuitConfig::default(),
            nmpc: MPCConfig::default(),
            max_infeasible: 20,
            lane_width: 1.3,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.pd.validate()?;
        self.pure_pursuit.validate()?;
        self.nmpc.validate()?;
        if !(self.lane_width > 0.0) {
            return Err(Error::domain("lane width must be positive"));
        }
        Ok(())
    }

    /// Fresh actor for one episode. `policy` is required for the policy kind.
    pub fn build(&self, policy: Option<&LinearPolicy>) -> Result<Box<dyn Actor + Send>> {
        self.validate()?;
        Ok(match self.kind {
            ControllerKind::Pd => Box::new(PdActor::new(self.pd)),
            ControllerKind::PurePursuit => Box::new(PurePursuitActor::new(
                self.pure_pursuit,
                self.reference,
                self.lane_width,
            )),
            ControllerKind::Nmpc => Box::new(NmpcActor::new(
                self.nmpc,
                self.reference,
                self.lane_width,
                self.max_infeasible,
            )),
            ControllerKind::Policy => {
                let p =
                    policy.ok_or_else(|| Error::domain("policy controller needs a policy file"))?;
                Box::new(PolicyActor::new(p.clone()))
            }
            ControllerKind::Oracle => Box::new(OracleActor),
            ControllerKind::Zero => Box::new(ZeroActor),
        })
    }
}

/// Reference-path pose `ahead` metres past the current arc length, clamped
/// to the path.
fn path_ahead(obs: &Observation<'_>, ahead: f64) -> Result<Pose2D> {
    let total = obs.path.total_length();
    obs.path.pose_at((obs.s + ahead).clamp(0.0, total))
}

/// Commands `(0, 0)`; the environment lifts it to the minimum speed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroActor;

impl Actor for ZeroActor {
    fn act(&mut self, _: &Observation<'_>) -> Result<Action> {
        Ok(BodyTwist::new(0.0, 0.0).into())
    }
}

/// Steers the image centroid to the centre column.
#[derive(Debug, Clone)]
pub struct PdActor {
    gains: PDGains,
    prev: Option<f64>,
}

impl PdActor {
    pub fn new(gains: PDGains) -> Self {
        PdActor { gains, prev: None }
    }
}

impl Actor for PdActor {
    fn reset(&mut self) {
        self.prev = None;
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        let e = pd_error(obs.image).or(self.prev).unwrap_or(0.0);
        let prev = self.prev.unwrap_or(e);
        self.prev = Some(e);
        Ok(pd_center(e, prev, obs.cfg.dt, &self.gains)?.into())
    }
}

#[derive(Debug, Clone)]
pub struct PurePursuitActor {
    cfg: PurePursuitConfig,
    source: ReferenceSource,
    lane_width: f64,
    last: BodyTwist,
}

impl PurePursuitActor {
    pub fn new(cfg: PurePursuitConfig, source: ReferenceSource, lane_width: f64) -> Self {
        PurePursuitActor {
            cfg,
            source,
            lane_width,
            last: BodyTwist::new(cfg.v_fixed, 0.0),
        }
    }

    /// First path point at least `L` from the robot, searching forward.
    fn ground_truth_goal(&self, obs: &Observation<'_>) -> Result<(f64, f64)> {
        let pose = obs.state.pose;
        let l = self.cfg.lookahead_l;
        let step = 0.02;
        let mut k = 0usize;
        loop {
            let ahead = k as f64 * step;
            let p = path_ahead(obs, ahead)?;
            let b = pose.to_body(p.x, p.y);
            if b.0.hypot(b.1) >= l || ahead > 3.0 * l || obs.s + ahead >= obs.path.total_length() {
                return Ok(b);
            }
            k += 1;
        }
    }

    /// Farthest lane-fit waypoint within `L`.
    fn vision_goal(&self, obs: &Observation<'_>) -> Result<(f64, f64)> {
        let spacing = 0.05;
        let n = (self.cfg.lookahead_l / spacing).ceil() as usize + 1;
        let wps = lane_fit_waypoints(obs.image, &obs.cfg.camera, n, spacing, self.lane_width)?;
        wps.iter()
            .rfind(|w| w.x.hypot(w.y) <= self.cfg.lookahead_l)
            .or(wps.first())
            .map(|w| (w.x, w.y))
            .ok_or(Error::NoReference)
    }
}

impl Actor for PurePursuitActor {
    fn reset(&mut self) {
        self.last = BodyTwist::new(self.cfg.v_fixed, 0.0);
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        let goal = match self.source {
            ReferenceSource::GroundTruth => Some(self.ground_truth_goal(obs)?),
            ReferenceSource::Vision => self.vision_goal(obs).ok(),
        };
        if let Some(g) = goal {
            self.last = pure_pursuit(g, self.cfg.v_fixed, self.cfg.lookahead_l)?;
        }
        Ok(self.last.into())
    }
}

/// Receding-horizon MPC with warm start and a failure budget.
#[derive(Debug, Clone)]
pub struct NmpcActor {
    cfg: MPCConfig,
    source: ReferenceSource,
    lane_width: f64,
    max_failures: usize,
    failures: usize,
    warm: Option<Vec<BodyTwist>>,
    last: BodyTwist,
}

impl NmpcActor {
    pub fn new(
        cfg: MPCConfig,
        source: ReferenceSource,
        lane_width: f64,
        max_failures: usize,
    ) -> Self {
        NmpcActor {
            cfg,
            source,
            lane_width,
            max_failures,
            failures: 0,
            warm: None,
            last: BodyTwist::default(),
        }
    }

    fn reference(&self, obs: &Observation<'_>) -> Result<Vec<Pose2D>> {
        let step = obs.cfg.weights.v_desired * self.cfg.dt;
        match self.source {
            ReferenceSource::GroundTruth => (1..=self.cfg.horizon_n)
                .map(|k| Ok(obs.state.pose.relative(&path_ahead(obs, k as f64 * step)?)))
                .collect(),
            ReferenceSource::Vision => lane_fit_waypoints(
                obs.image,
                &obs.cfg.camera,
                self.cfg.horizon_n,
                step,
                self.lane_width,
            ),
        }
    }
}

impl Actor for NmpcActor {
    fn reset(&mut self) {
        self.failures = 0;
        self.warm = None;
        self.last = BodyTwist::default();
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        let solved = self
            .reference(obs)
            .and_then(|r| nmpc_solve(obs.state, &r, &self.cfg, self.warm.as_deref()));
        match solved {
            Ok(sol) => {
                self.failures = 0;
                self.last = sol.inputs[0];
                let mut w = sol.inputs[1..].to_vec();
                w.push(*sol.inputs.last().expect("horizon ≥ 1"));
                self.warm = Some(w);
            }
            Err(e @ (Error::Infeasible { .. } | Error::NoReference)) => {
                self.failures += 1;
                self.warm = None;
                if self.failures > self.max_failures {
                    return Err(match e {
                        Error::Infeasible { .. } => e,
                        _ => Error::Infeasible {
                            iterations: 0,
                            residual: f64::INFINITY,
                        },
                    });
                }
            }
            Err(e) => return Err(e),
        }
        Ok(self.last.into())
    }
}

/// Privileged follower: each step it picks the constant-curvature arc that
/// lands on the reference pose one speed step ahead. The speed is the
/// desired speed, lowered where the path curvature would exceed the yaw-rate
/// limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleActor;

impl Actor for OracleActor {
    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        let dt = obs.cfg.dt;
        let total = obs.path.total_length();
        let kappa_path = curvature_at(obs.path, obs.s.clamp(0.0, total))?;
        let v_d = obs
            .cfg
            .weights
            .v_desired
            .min(0.95 * OMEGA_MAX / kappa_path.max(1e-9));
        let target = path_ahead(obs, v_d * dt)?;
        let (x, y) = obs.state.pose.to_body(target.x, target.y);
        let d2 = x * x + y * y;
        if d2 < 1e-18 {
            return Ok(BodyTwist::new(0.0, 0.0).into());
        }
        let kappa = 2.0 * y / d2;
        let phi = 2.0 * y.atan2(x);
        let chord = d2.sqrt();
        let arc = if phi.abs() < 1e-9 {
            chord
        } else {
            chord * (phi / 2.0) / (phi / 2.0).sin()
        };
        let v = arc / dt;
        Ok(BodyTwist::new(v, v * kappa).into())
    }
}
