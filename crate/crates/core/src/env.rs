//! Step/reset environment surface for external training frameworks.
//!
//! An [`EnvHandle`] owns one episode at a time on a shared [`World`].
//! Observations are the distilled feature vector (row-major, `feature_dim`
//! floats in `[0, 1]`); actions are two floats in the configured
//! [`ActionSpace`]. The transition is the same code path as
//! [`run_episode`](crate::tracking::run_episode), so a fixed action sequence
//! yields bit-identical trajectories through either entry point.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::policy::ActionSpace;
use crate::robot::{Action, BodyTwist, WheelSpeeds, OMEGA_MAX, V_MAX, V_MIN};
use crate::sensor::distill;
use crate::tracking::{DoneReason, EpisodeCore, World};

/// Version string of the step/reset interface.
pub const ABI_VERSION: &str = "lanekeep-env/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub action_low: [f64; 2],
    pub action_high: [f64; 2],
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub e_x: f64,
    pub e_theta: f64,
    pub e_v: f64,
    pub s: f64,
    pub i_star: usize,
    pub done_reason: DoneReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Ended by a tracking-error limit.
    pub terminated: bool,
    /// Ended by the step limit.
    pub truncated: bool,
    pub info: StepInfo,
}

pub struct EnvHandle {
    world: Arc<World>,
    action_space: ActionSpace,
    episode: Option<EpisodeCore>,
}

impl EnvHandle {
    pub fn new(world: Arc<World>, action_space: ActionSpace) -> EnvHandle {
        EnvHandle {
            world,
            action_space,
            episode: None,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        let (action_low, action_high) = match self.action_space {
            ActionSpace::BodyTwist => ([V_MIN, -OMEGA_MAX], [V_MAX, OMEGA_MAX]),
            ActionSpace::WheelSpeeds => {
                let (lo, hi) = self.world.cfg.ik.wheel_box();
                ([lo, lo], [hi, hi])
            }
        };
        EnvSpec {
            obs_dim: self.world.cfg.feature_dim,
            action_space: self.action_space,
            action_low,
            action_high,
        }
    }

    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let core = EpisodeCore::reset(&self.world, seed);
        let obs = self.features(&core)?;
        self.episode = Some(core);
        Ok(obs)
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<EnvStep> {
        let action = match self.action_space {
            ActionSpace::BodyTwist => Action::Body(BodyTwist {
                v: action[0],
                omega: action[1],
            }),
            ActionSpace::WheelSpeeds => Action::Wheels(WheelSpeeds {
                left: action[0],
                right: action[1],
            }),
        };
        let core = self.episode.as_mut().ok_or(Error::EpisodeDone)?;
        let out = core.step(&self.world, action)?;
        let obs = distill(&core.image, self.world.cfg.feature_dim)?.values;
        let r = out.record;
        Ok(EnvStep {
            obs,
            reward: r.reward,
            terminated: matches!(
                out.done_reason,
                DoneReason::Translation | DoneReason::Orientation
            ),
            truncated: out.done_reason == DoneReason::MaxSteps,
            info: StepInfo {
                e_x: r.e_x,
                e_theta: r.e_theta,
                e_v: r.e_v,
                s: r.s,
                i_star: r.i_star,
                done_reason: out.done_reason,
            },
        })
    }

    /// Current camera frame as binary PGM bytes.
    pub fn debug_pgm(&self) -> Option<Vec<u8>> {
        self.episode.as_ref().map(|e| e.image.to_pgm())
    }

    fn features(&self, core: &EpisodeCore) -> Result<Vec<f64>> {
        Ok(distill(&core.image, self.world.cfg.feature_dim)?.values)
    }
}
