use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_eval, MetricsRow};
use crate::controllers::{ControllerConfig, ControllerKind};
use crate::io::g6;
use crate::policy::{cem_train, ActionSpace, CEMConfig, LinearPolicy};
use crate::sensor::MarkerKind;
use crate::track::TrackSpec;
use crate::tracking::{EnvConfig, RewardMode, World};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    WaypointSpacing,
    LookaheadAlpha,
    InputFrequency,
    MarkerKind,
    ControllerCompare,
    IkVsE2e,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::WaypointSpacing,
        Experiment::LookaheadAlpha,
        Experiment::InputFrequency,
        Experiment::MarkerKind,
        Experiment::ControllerCompare,
        Experiment::IkVsE2e,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::WaypointSpacing => "waypoint_spacing",
            Experiment::LookaheadAlpha => "lookahead_alpha",
            Experiment::InputFrequency => "input_frequency",
            Experiment::MarkerKind => "marker_kind",
            Experiment::ControllerCompare => "controller_compare",
            Experiment::IkVsE2e => "ik_vs_e2e",
        }
    }

    pub fn from_name(s: &str) -> Option<Experiment> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Grid values for every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub ds: Vec<f64>,
    pub velocities: Vec<f64>,
    pub alphas: Vec<usize>,
    pub frequencies: Vec<u32>,
    pub markers: Vec<String>,
    pub controllers: Vec<ControllerKind>,
    pub action_spaces: Vec<ActionSpace>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            ds: vec![1.0, 0.75, 0.5, 0.25, 0.1],
            velocities: vec![0.75, 0.6, 0.45, 0.3, 0.15],
            alphas: vec![0, 1, 2, 3, 4],
            frequencies: vec![20, 4, 2, 1],
            markers: vec!["cone".into(), "cylinder".into(), "solid_lane".into()],
            controllers: vec![
                ControllerKind::Pd,
                ControllerKind::PurePursuit,
                ControllerKind::Nmpc,
                ControllerKind::Policy,
            ],
            action_spaces: vec![ActionSpace::BodyTwist, ActionSpace::WheelSpeeds],
        }
    }
}

/// Everything a sweep varies around.
#[derive(Debug, Clone)]
pub struct SweepContext {
    /// Training track; evaluation uses the same track resampled at `eval_ds`.
    pub track: TrackSpec,
    pub eval_ds: f64,
    pub env: EnvConfig,
    pub controller: ControllerConfig,
    /// Policy for the policy controller; trained on demand when absent.
    pub policy: Option<LinearPolicy>,
    pub cem: CEMConfig,
    pub action_space: ActionSpace,
    pub reward_mode: RewardMode,
    pub episodes: usize,
    pub seed: u64,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Formatted grid coordinates, comma separated.
    pub key: String,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub experiment: Experiment,
    pub key_header: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn file_name(&self) -> String {
        format!("{}.csv", self.experiment.name())
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.key_header, MetricsRow::CSV_HEADER);
        for r in &self.rows {
            s += &format!("{},{}\n", r.key, r.metrics.csv_cells());
        }
        s
    }
}

impl SweepContext {
    fn train(
        &self,
        track: &TrackSpec,
        env: &EnvConfig,
        space: ActionSpace,
    ) -> Result<LinearPolicy> {
        let world = World::new(track.clone(), env.clone())?;
        Ok(cem_train(&world, self.reward_mode, space, &self.cem)?.0)
    }

    fn base_policy(&self, controller: &ControllerConfig) -> Result<Option<LinearPolicy>> {
        if controller.kind != ControllerKind::Policy {
            return Ok(None);
        }
        match &self.policy {
            Some(p) => Ok(Some(p.clone())),
            None => self
                .train(&self.track, &self.env, self.action_space)
                .map(Some),
        }
    }

    fn evaluate(
        &self,
        eval_track: &TrackSpec,
        env: EnvConfig,
        controller: &ControllerConfig,
        policy: Option<&LinearPolicy>,
    ) -> Result<MetricsRow> {
        let world = World::new(eval_track.clone(), env)?;
        let make = || controller.build(policy);
        Ok(run_eval(&world, &make, self.episodes, self.seed)?.1)
    }
}

fn with_speed(
    controller: &ControllerConfig,
    env: &EnvConfig,
    v: f64,
) -> (ControllerConfig, EnvConfig) {
    let mut c = controller.clone();
    c.pd.v_ref = v;
    c.pure_pursuit.v_fixed = v;
    let mut e = env.clone();
    e.weights.v_desired = v;
    (c, e)
}

fn run_points<T: Sync>(
    points: &[T],
    f: impl Fn(&T) -> Result<SweepRow> + Sync + Send,
) -> Result<Vec<SweepRow>> {
    points.par_iter().map(f).collect()
}

/// One metrics row per grid point, in grid order.
pub fn sweep(experiment: Experiment, ctx: &SweepContext) -> Result<SweepReport> {
    let eval_track = ctx.track.with_ds(ctx.eval_ds)?;
    let grid = &ctx.grid;
    let (key_header, rows) = match experiment {
        Experiment::WaypointSpacing => {
            let points: Vec<(f64, f64)> = grid
                .ds
                .iter()
                .flat_map(|&ds| grid.velocities.iter().map(move |&v| (ds, v)))
                .collect();
            let rows = run_points(&points, |&(ds, v)| {
                let (controller, env) = with_speed(&ctx.controller, &ctx.env, v);
                let policy = if controller.kind == ControllerKind::Policy {
                    Some(ctx.train(&ctx.track.with_ds(ds)?, &env, ctx.action_space)?)
                } else {
                    None
                };
                let metrics = ctx.evaluate(&eval_track, env, &controller, policy.as_ref())?;
                Ok(SweepRow {
                    key: format!("{},{}", g6(ds), g6(v)),
                    metrics,
                })
            })?;
            ("ds,v_d", rows)
        }
        Experiment::LookaheadAlpha => {
            let policy = ctx.base_policy(&ctx.controller)?;
            let rows = run_points(&grid.alphas, |&alpha| {
                let env = EnvConfig {
                    alpha,
                    ..ctx.env.clone()
                };
                let metrics = ctx.evaluate(&eval_track, env, &ctx.controller, policy.as_ref())?;
                Ok(SweepRow {
                    key: alpha.to_string(),
                    metrics,
                })
            })?;
            ("alpha", rows)
        }
        Experiment::InputFrequency => {
            let policy = ctx.base_policy(&ctx.controller)?;
            let rows = run_points(&grid.frequencies, |&hz| {
                let env = EnvConfig {
                    source_hz: hz,
                    ..ctx.env.clone()
                };
                let metrics = ctx.evaluate(&eval_track, env, &ctx.controller, policy.as_ref())?;
                Ok(SweepRow {
                    key: hz.to_string(),
                    metrics,
                })
            })?;
            ("hz", rows)
        }
        Experiment::MarkerKind => {
            let kinds: Vec<MarkerKind> = grid
                .markers
                .iter()
                .map(|m| {
                    MarkerKind::from_name(m).ok_or_else(|| {
                        Error::config("sweep.markers", format!("unknown marker `{m}`"))
                    })
                })
                .collect::<Result<_>>()?;
            let policy = ctx.base_policy(&ctx.controller)?;
            let rows = run_points(&kinds, |&marker| {
                let env = EnvConfig {
                    marker,
                    ..ctx.env.clone()
                };
                let metrics = ctx.evaluate(&eval_track, env, &ctx.controller, policy.as_ref())?;
                Ok(SweepRow {
                    key: marker.name().to_string(),
                    metrics,
                })
            })?;
            ("marker", rows)
        }
        Experiment::ControllerCompare => {
            let needs_policy = grid.controllers.contains(&ControllerKind::Policy);
            let policy = if needs_policy {
                ctx.base_policy(&ControllerConfig {
                    kind: ControllerKind::Policy,
                    ..ctx.controller.clone()
                })?
            } else {
                None
            };
            let rows = run_points(&grid.controllers, |&kind| {
                let controller = ControllerConfig {
                    kind,
                    ..ctx.controller.clone()
                };
                let metrics =
                    ctx.evaluate(&eval_track, ctx.env.clone(), &controller, policy.as_ref())?;
                Ok(SweepRow {
                    key: kind.name().to_string(),
                    metrics,
                })
            })?;
            ("controller", rows)
        }
        Experiment::IkVsE2e => {
            let rows = run_points(&grid.action_spaces, |&space| {
                let policy = ctx.train(&ctx.track, &ctx.env, space)?;
                let controller = ControllerConfig {
                    kind: ControllerKind::Policy,
                    ..ctx.controller.clone()
                };
                let metrics =
                    ctx.evaluate(&eval_track, ctx.env.clone(), &controller, Some(&policy))?;
                Ok(SweepRow {
                    key: space.name().to_string(),
                    metrics,
                })
            })?;
            ("action_space", rows)
        }
    };
    Ok(SweepReport {
        experiment,
        key_header: key_header.to_string(),
        rows,
    })
}
