//! Arc-length waypoint selection, tracking errors, the reward, termination
//! and the episode state machine.
//!
//! Each step: simulate the clamped action, accumulate the chord length
//! travelled into `S`, pick the reference row nearest to `S` (shifted by the
//! look-ahead `alpha`), then score position, heading and speed errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::icg_reward;
use crate::geometry::{nearest_index, wrap_angle, ArcPath, Pose2D, RefTable};
use crate::robot::{
    clamp_action, clamp_wheels, ik_wheel_to_body, step_dynamics, Action, BodyTwist, IKParams,
    RobotState, SlipModel,
};
use crate::sensor::{
    centroid_error, BinaryImage, CameraModel, FrameHold, MarkerKind, MissingSpan, Renderer, Scene,
};
use crate::track::TrackSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub v_desired: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub e_x_cap: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            v_desired: 0.75,
            v_max: 1.0,
            omega_max: 0.5,
            e_x_cap: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationConfig {
    pub e_x_limit: f64,
    pub e_theta_limit: f64,
    pub max_steps: usize,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig {
            e_x_limit: 1.0,
            e_theta_limit: 0.1,
            max_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    #[default]
    None,
    Translation,
    Orientation,
    MaxSteps,
}

impl DoneReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DoneReason::None => "none",
            DoneReason::Translation => "translation",
            DoneReason::Orientation => "orientation",
            DoneReason::MaxSteps => "max_steps",
        }
    }

    pub fn parse(s: &str) -> Option<DoneReason> {
        [
            DoneReason::None,
            DoneReason::Translation,
            DoneReason::Orientation,
            DoneReason::MaxSteps,
        ]
        .into_iter()
        .find(|d| d.as_str() == s)
    }
}

/// Which reward the episode reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Waypoint-guided: position, heading, speed and action terms.
    #[default]
    Wpg,
    /// Image-centroid-guided: centring, speed and action terms.
    Icg,
}

/// Euclidean chord between consecutive positions.
pub fn arc_increment(prev: &Pose2D, next: &Pose2D) -> f64 {
    (next.x - prev.x).hypot(next.y - prev.y)
}

/// Reference row `min(nearest(S) + alpha, last)`.
pub fn select_waypoint(table: &RefTable, s: f64, alpha: usize) -> (Pose2D, usize) {
    let i = (nearest_index(table, s) + alpha).min(table.last_index());
    (table.rows[i].pose(), i)
}

pub fn position_error(pose: &Pose2D, reference: &Pose2D) -> f64 {
    (pose.x - reference.x).hypot(pose.y - reference.y)
}

fn yaw_quaternion(theta: f64) -> [f64; 4] {
    let half = 0.5 * wrap_angle(theta);
    [half.cos(), 0.0, 0.0, half.sin()]
}

/// `1 − |q · q_ref|` for yaw-only unit quaternions, i.e. `1 − cos(Δθ/2)`
/// with `Δθ` wrapped to `(−π, π]`.
pub fn orientation_error(theta: f64, theta_ref: f64) -> f64 {
    let q = yaw_quaternion(theta);
    let r = yaw_quaternion(theta_ref);
    let dot: f64 = q.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
    (1.0 - dot.abs()).max(0.0)
}

pub fn velocity_error(v: f64, weights: &RewardWeights) -> f64 {
    ((v - weights.v_desired).abs() / weights.v_max).min(1.0)
}

/// Speed error with sign: positive when faster than desired.
pub fn signed_velocity_error(v: f64, weights: &RewardWeights) -> f64 {
    v - weights.v_desired
}

fn unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Normalised action magnitudes `(|v|/v_max, |ω|/ω_max)`, each in `[0, 1]`.
pub fn action_penalties(action: &BodyTwist, weights: &RewardWeights) -> (f64, f64) {
    (
        unit(action.v.abs() / weights.v_max),
        unit(action.omega.abs() / weights.omega_max),
    )
}

/// Waypoint-guided per-step reward, in `[0, 5]`.
pub fn step_reward(
    e_x: f64,
    e_theta: f64,
    e_v: f64,
    action: &BodyTwist,
    weights: &RewardWeights,
) -> f64 {
    let ex = unit(e_x / weights.e_x_cap);
    let (a1, a2) = action_penalties(action, weights);
    let sq = |e: f64| (1.0 - unit(e)).powi(2);
    sq(ex) + sq(e_theta) + sq(e_v) + sq(a1) + sq(a2)
}

/// Translation beats orientation beats the step budget.
pub fn check_termination(e_x: f64, e_theta: f64, t: usize, cfg: &TerminationConfig) -> DoneReason {
    if e_x >= cfg.e_x_limit {
        DoneReason::Translation
    } else if e_theta >= cfg.e_theta_limit {
        DoneReason::Orientation
    } else if t >= cfg.max_steps {
        DoneReason::MaxSteps
    } else {
        DoneReason::None
    }
}

/// Everything about an episode except the track and the actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub ik: IKParams,
    pub slip: SlipModel,
    pub dt: f64,
    pub source_hz: u32,
    pub camera: CameraModel,
    pub marker: MarkerKind,
    pub blur_sigma: f64,
    pub missing: Vec<MissingSpan>,
    pub feature_dim: usize,
    pub weights: RewardWeights,
    pub termination: TerminationConfig,
    pub alpha: usize,
    pub reward_mode: RewardMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            ik: IKParams::default(),
            slip: SlipModel::default(),
            dt: 0.05,
            source_hz: 20,
            camera: CameraModel::default(),
            marker: MarkerKind::default(),
            blur_sigma: 0.0,
            missing: Vec::new(),
            feature_dim: 64,
            weights: RewardWeights::default(),
            termination: TerminationConfig::default(),
            alpha: 0,
            reward_mode: RewardMode::Wpg,
        }
    }
}

impl EnvConfig {
    pub fn control_hz(&self) -> u32 {
        (1.0 / self.dt).round() as u32
    }
}

/// A track, its rendered scene and the episode configuration, shared by
/// every episode run on it.
#[derive(Debug, Clone)]
pub struct World {
    pub track: TrackSpec,
    pub cfg: EnvConfig,
    renderer: Renderer,
    scene: Scene,
    hold: FrameHold,
}

impl World {
    pub fn new(track: TrackSpec, cfg: EnvConfig) -> Result<World> {
        if !(cfg.dt > 0.0) {
            return Err(Error::domain("control period must be positive"));
        }
        cfg.ik.validate()?;
        cfg.slip.validate()?;
        if track.ref_tables.is_empty() {
            return Err(Error::domain("track has no reference tables"));
        }
        crate::sensor::grid_shape(cfg.feature_dim)?;
        let hold = FrameHold::new(cfg.source_hz, cfg.control_hz())?;
        let renderer = Renderer::new(&cfg.camera)?;
        let scene = Scene::from_track(&track, cfg.marker, &cfg.missing);
        Ok(World {
            track,
            cfg,
            renderer,
            scene,
            hold,
        })
    }

    pub fn renderer(&self) -> &Renderer {
        &self.renderer
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    /// Same world with a different configuration (rebuilds the scene only
    /// when the markers change).
    pub fn with_config(&self, cfg: EnvConfig) -> Result<World> {
        World::new(self.track.clone(), cfg)
    }

    pub fn render(&self, pose: &Pose2D) -> BinaryImage {
        self.renderer.render(&self.scene, pose, self.cfg.blur_sigma)
    }
}

/// Alg.-1 loop state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeState {
    pub t: usize,
    pub s: f64,
    pub table_index: usize,
    pub last_pose: Pose2D,
    pub done: bool,
    pub done_reason: DoneReason,
}

/// What an actor may look at. Learned and vision controllers use only the
/// image; ground-truth controllers also read the reference.
pub struct Observation<'e> {
    pub image: &'e BinaryImage,
    pub state: &'e RobotState,
    pub table: &'e RefTable,
    pub path: &'e ArcPath,
    pub s: f64,
    pub step: usize,
    pub cfg: &'e EnvConfig,
}

pub trait Actor {
    fn reset(&mut self) {}
    fn act(&mut self, obs: &Observation<'_>) -> Result<Action>;
}

/// One logged transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub a_v: f64,
    pub a_omega: f64,
    pub s: f64,
    pub i_star: usize,
    pub e_x: f64,
    pub e_theta: f64,
    pub e_v: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub table_index: usize,
    pub steps: Vec<StepRecord>,
    pub done_reason: DoneReason,
}

impl EpisodeRecord {
    pub fn episode_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn final_s(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.s)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Result of a single transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub done_reason: DoneReason,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.done_reason != DoneReason::None
    }
}

/// Episode state that does not borrow its world.
#[derive(Debug, Clone)]
pub(crate) struct EpisodeCore {
    pub(crate) seed: u64,
    pub(crate) robot: RobotState,
    pub(crate) state: EpisodeState,
    pub(crate) image: BinaryImage,
}

impl EpisodeCore {
    pub(crate) fn reset(world: &World, seed: u64) -> EpisodeCore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table_index = rng.random_range(0..world.track.ref_tables.len());
        let start = world.track.ref_tables[table_index].rows[0].pose();
        EpisodeCore {
            seed,
            robot: RobotState::at(start),
            state: EpisodeState {
                table_index,
                last_pose: start,
                ..Default::default()
            },
            image: world.render(&start),
        }
    }

    pub(crate) fn table<'w>(&self, world: &'w World) -> &'w RefTable {
        &world.track.ref_tables[self.state.table_index]
    }

    pub(crate) fn legal_twist(world: &World, action: Action) -> BodyTwist {
        let ik = &world.cfg.ik;
        let raw = match action {
            Action::Body(t) => t,
            Action::Wheels(w) => ik_wheel_to_body(clamp_wheels(w, ik), ik),
        };
        clamp_action(raw.v, raw.omega)
    }

    pub(crate) fn step(&mut self, world: &World, action: Action) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::EpisodeDone);
        }
        let cfg = &world.cfg;
        let commanded = Self::legal_twist(world, action);
        let prev = self.robot.pose;
        self.robot = step_dynamics(
            &self.robot,
            Action::Body(commanded),
            cfg.dt,
            &cfg.slip,
            &cfg.ik,
        )?;
        let pose = self.robot.pose;

        self.state.s += arc_increment(&prev, &pose);
        let (reference, i_star) = select_waypoint(self.table(world), self.state.s, cfg.alpha);
        let e_x = position_error(&pose, &reference);
        let e_theta = orientation_error(pose.theta, reference.theta);
        let e_v = velocity_error(self.robot.twist.v, &cfg.weights);

        let t = self.state.t;
        self.state.t += 1;
        if world.hold.is_fresh(self.state.t) {
            world
                .renderer
                .render_into(&world.scene, &pose, &mut self.image);
            if cfg.blur_sigma > 0.0 {
                self.image = self.image.blurred(cfg.blur_sigma).thresholded(0.5);
            }
        }

        let reward = match cfg.reward_mode {
            RewardMode::Wpg => step_reward(e_x, e_theta, e_v, &commanded, &cfg.weights),
            RewardMode::Icg => {
                icg_reward(centroid_error(&self.image), e_v, &commanded, &cfg.weights)
            }
        };
        let done_reason = check_termination(e_x, e_theta, self.state.t, &cfg.termination);
        self.state.last_pose = pose;
        self.state.done = done_reason != DoneReason::None;
        self.state.done_reason = done_reason;

        Ok(StepOutcome {
            record: StepRecord {
                t,
                x: pose.x,
                y: pose.y,
                theta: pose.theta,
                v: self.robot.twist.v,
                omega: self.robot.twist.omega,
                a_v: commanded.v,
                a_omega: commanded.omega,
                s: self.state.s,
                i_star,
                e_x,
                e_theta,
                e_v,
                reward,
            },
            done_reason,
        })
    }
}

/// A running episode on a [`World`].
pub struct Episode<'w> {
    world: &'w World,
    core: EpisodeCore,
}

impl<'w> Episode<'w> {
    /// Draws a reference set from `seed` and places the robot on its first
    /// row with zero twist.
    pub fn reset(world: &'w World, seed: u64) -> Episode<'w> {
        Episode {
            world,
            core: EpisodeCore::reset(world, seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.core.seed
    }

    pub fn state(&self) -> &EpisodeState {
        &self.core.state
    }

    pub fn robot(&self) -> &RobotState {
        &self.core.robot
    }

    pub fn image(&self) -> &BinaryImage {
        &self.core.image
    }

    pub fn table(&self) -> &'w RefTable {
        self.core.table(self.world)
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            image: &self.core.image,
            state: &self.core.robot,
            table: self.table(),
            path: &self.world.track.paths[self.core.state.table_index],
            s: self.core.state.s,
            step: self.core.state.t,
            cfg: &self.world.cfg,
        }
    }

    /// Projects any action onto the legal body-twist box.
    pub fn legal_twist(&self, action: Action) -> BodyTwist {
        EpisodeCore::legal_twist(self.world, action)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        self.core.step(self.world, action)
    }
}

/// Runs one seeded episode to termination.
pub fn run_episode(world: &World, actor: &mut dyn Actor, seed: u64) -> Result<EpisodeRecord> {
    let mut ep = Episode::reset(world, seed);
    actor.reset();
    let mut steps = Vec::with_capacity(world.cfg.termination.max_steps);
    loop {
        let action = actor.act(&ep.observation())?;
        let out = ep.step(action)?;
        steps.push(out.record);
        if out.done() {
            return Ok(EpisodeRecord {
                seed,
                table_index: ep.state().table_index,
                steps,
                done_reason: out.done_reason,
            });
        }
    }
}
