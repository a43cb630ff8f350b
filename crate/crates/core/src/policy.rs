//! Linear policies over pooled image features, trained with the
//! cross-entropy method.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::robot::{clamp_action, clamp_wheels, Action, IKParams, WheelSpeeds};
use crate::sensor::{distill, grid_shape, FeatureVec};
use crate::tracking::{run_episode, Actor, Observation, RewardMode, World};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    /// `(v, ω)`, mapped to wheels by the kinematic model.
    #[default]
    BodyTwist,
    /// `(φ_L, φ_R)` directly.
    WheelSpeeds,
}

impl ActionSpace {
    pub fn name(&self) -> &'static str {
        match self {
            ActionSpace::BodyTwist => "body_twist",
            ActionSpace::WheelSpeeds => "wheel_speeds",
        }
    }

    pub fn from_name(s: &str) -> Option<ActionSpace> {
        match s {
            "body_twist" => Some(ActionSpace::BodyTwist),
            "wheel_speeds" => Some(ActionSpace::WheelSpeeds),
            _ => None,
        }
    }
}

/// `a = W·f + b`, projected onto the action box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    pub feature_dim: usize,
    pub action_space: ActionSpace,
    /// Row-major `2 × d`.
    pub weights: Vec<f64>,
    pub bias: [f64; 2],
}

impl LinearPolicy {
    pub fn zeros(feature_dim: usize, action_space: ActionSpace) -> Self {
        LinearPolicy {
            feature_dim,
            action_space,
            weights: vec![0.0; 2 * feature_dim],
            bias: [0.0; 2],
        }
    }

    pub fn param_count(feature_dim: usize) -> usize {
        2 * feature_dim + 2
    }

    /// Parameters laid out as `[W row 0, W row 1, b]`.
    pub fn from_params(
        feature_dim: usize,
        action_space: ActionSpace,
        params: &[f64],
    ) -> Result<Self> {
        if params.len() != Self::param_count(feature_dim) {
            return Err(Error::domain(format!(
                "expected {} parameters, got {}",
                Self::param_count(feature_dim),
                params.len()
            )));
        }
        let d2 = 2 * feature_dim;
        Ok(LinearPolicy {
            feature_dim,
            action_space,
            weights: params[..d2].to_vec(),
            bias: [params[d2], params[d2 + 1]],
        })
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn validate(&self) -> Result<()> {
        grid_shape(self.feature_dim)?;
        if self.weights.len() != 2 * self.feature_dim {
            return Err(Error::domain("policy weight matrix has the wrong shape"));
        }
        if !self.params().iter().all(|p| p.is_finite()) {
            return Err(Error::domain("policy parameters must be finite"));
        }
        Ok(())
    }

    /// First row `d,action_space`, two weight rows, one bias row.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.feature_dim, self.action_space.name());
        for row in self.weights.chunks(self.feature_dim) {
            let cells: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        writeln!(s, "{:?},{:?}", self.bias[0], self.bias[1]).unwrap();
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            what: "policy",
            path: Default::default(),
            message: m,
        };
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != 4 {
            return Err(bad(format!("expected 4 rows, found {}", lines.len())));
        }
        let (d, space) = lines[0]
            .split_once(',')
            .ok_or_else(|| bad("header must be `d,action_space`".into()))?;
        let d: usize = d
            .trim()
            .parse()
            .map_err(|e| bad(format!("feature size: {e}")))?;
        let space = ActionSpace::from_name(space.trim())
            .ok_or_else(|| bad(format!("unknown action space `{}`", space.trim())))?;
        let row = |l: &str| -> Result<Vec<f64>> {
            l.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(format!("`{c}`: {e}")))
                })
                .collect()
        };
        let mut weights = row(lines[1])?;
        weights.extend(row(lines[2])?);
        let bias = row(lines[3])?;
        if weights.len() != 2 * d || bias.len() != 2 {
            return Err(bad("row lengths do not match the header".into()));
        }
        let p = LinearPolicy {
            feature_dim: d,
            action_space: space,
            weights,
            bias: [bias[0], bias[1]],
        };
        p.validate()?;
        Ok(p)
    }
}

/// Affine map of the features, clamped into the box of the policy's action
/// space.
pub fn policy_act(features: &FeatureVec, policy: &LinearPolicy, ik: &IKParams) -> Result<Action> {
    let d = policy.feature_dim;
    if features.dim() != d {
        return Err(Error::domain(format!(
            "policy expects {d} features, got {}",
            features.dim()
        )));
    }
    let dot = |row: &[f64]| {
        row.iter()
            .zip(&features.values)
            .map(|(w, f)| w * f)
            .sum::<f64>()
    };
    let a0 = dot(&policy.weights[..d]) + policy.bias[0];
    let a1 = dot(&policy.weights[d..]) + policy.bias[1];
    Ok(match policy.action_space {
        ActionSpace::BodyTwist => clamp_action(a0, a1).into(),
        ActionSpace::WheelSpeeds => clamp_wheels(
            WheelSpeeds {
                left: a0,
                right: a1,
            },
            ik,
        )
        .into(),
    })
}

#[derive(Debug, Clone)]
pub struct PolicyActor {
    policy: LinearPolicy,
}

impl PolicyActor {
    pub fn new(policy: LinearPolicy) -> Self {
        PolicyActor { policy }
    }
}

impl Actor for PolicyActor {
    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        let f = distill(obs.image, self.policy.feature_dim)?;
        policy_act(&f, &self.policy, &obs.cfg.ik)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CEMConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub init_std: f64,
    pub std_floor: f64,
    pub episodes_per_candidate: usize,
    pub seed: u64,
}

impl Default for CEMConfig {
    fn default() -> Self {
        CEMConfig {
            population: 64,
            elite_fraction: 0.25,
            iterations: 50,
            init_std: 0.5,
            std_floor: 0.02,
            episodes_per_candidate: 3,
            seed: 1,
        }
    }
}

impl CEMConfig {
    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).round() as usize)
            .clamp(1, self.population.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.episodes_per_candidate == 0 {
            return Err(Error::domain(
                "CEM population and episode count must be positive",
            ));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::domain("CEM elite fraction must lie in (0, 1)"));
        }
        if !(self.init_std > 0.0 && self.std_floor >= 0.0) {
            return Err(Error::domain("CEM standard deviations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub elite_mean: f64,
    pub population_mean: f64,
}

/// Mean undiscounted return of fresh actors over `seeds`.
pub fn evaluate_actor<F>(world: &World, make: F, seeds: &[u64]) -> Result<f64>
where
    F: Fn() -> Box<dyn Actor>,
{
    if seeds.is_empty() {
        return Err(Error::domain("evaluation needs at least one seed"));
    }
    let mut total = 0.0;
    for &seed in seeds {
        let mut actor = make();
        total += run_episode(world, actor.as_mut(), seed)?.episode_return();
    }
    Ok(total / seeds.len() as f64)
}

/// Mean return of a parameter vector under `world`'s reward mode.
pub fn evaluate_candidate(
    params: &[f64],
    feature_dim: usize,
    action_space: ActionSpace,
    world: &World,
    seeds: &[u64],
) -> Result<f64> {
    let policy = LinearPolicy::from_params(feature_dim, action_space, params)?;
    evaluate_actor(world, || Box::new(PolicyActor::new(policy.clone())), seeds)
}

/// Diagonal-Gaussian CEM. Each iteration samples a population, scores every
/// candidate on the same episode seeds, and refits mean and deviation to
/// the elite. Returns the final mean policy and the per-iteration curve.
pub fn cem_train(
    world: &World,
    reward_mode: RewardMode,
    action_space: ActionSpace,
    cfg: &CEMConfig,
) -> Result<(LinearPolicy, Vec<CurvePoint>)> {
    cfg.validate()?;
    let d = world.cfg.feature_dim;
    let mut env_cfg = world.cfg.clone();
    env_cfg.reward_mode = reward_mode;
    let world = world.with_config(env_cfg)?;

    let k = LinearPolicy::param_count(d);
    let mut mean = vec![0.0; k];
    let mut std = vec![cfg.init_std; k];
    let elite_n = cfg.elite_count();
    let mut curve = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(it as u64 + 1);
        let seeds: Vec<u64> = (0..cfg.episodes_per_candidate)
            .map(|_| rng.random())
            .collect();
        let population: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                (0..k)
                    .map(|j| mean[j] + std[j] * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let returns: Vec<f64> = population
            .par_iter()
            .map(|p| evaluate_candidate(p, d, action_space, &world, &seeds))
            .collect::<Result<_>>()?;

        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]).then(a.cmp(&b)));
        let elite = &order[..elite_n];
        for j in 0..k {
            let m = elite.iter().map(|&i| population[i][j]).sum::<f64>() / elite_n as f64;
            let var = elite
                .iter()
                .map(|&i| (population[i][j] - m).powi(2))
                .sum::<f64>()
                / elite_n as f64;
            mean[j] = m;
            std[j] = var.sqrt().max(cfg.std_floor);
        }
        curve.push(CurvePoint {
            iteration: it,
            elite_mean: elite.iter().map(|&i| returns[i]).sum::<f64>() / elite_n as f64,
            population_mean: returns.iter().sum::<f64>() / returns.len() as f64,
        });
    }
    Ok((LinearPolicy::from_params(d, action_space, &mean)?, curve))
}
