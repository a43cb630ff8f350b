//! Deterministic 2D skid-steer lane-keeping simulator.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: clothoid segments, arc-length paths and distance-stamped
//!   reference tables.
//! * [`track`]: figure-eight lanes, randomised cones and the shifted/reversed
//!   waypoint sets.
//! * [`robot`]: skid-steer inverse kinematics and exact unicycle integration.
//! * [`sensor`]: the 320×96 pseudo-camera, pooled feature distillation, ground
//!   homography and degraded-input transforms.
//! * [`tracking`]: arc-length waypoint selection, tracking errors, reward and
//!   the episode state machine.
//! * [`controllers`]: PD-centroid, pure pursuit, linearised MPC and the oracle
//!   follower used as a test reference.
//! * [`policy`]: linear feature policies trained with the cross-entropy method.
//! * [`eval`]: metric aggregation, curvature binning, histograms, feature KL
//!   study and parameter sweeps.
//! * [`env`]: step/reset handle for external training loops.
//! * [`config`] and [`io`]: the run configuration and every on-disk format.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controllers;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod policy;
pub mod robot;
pub mod sensor;
pub mod track;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{ArcPath, ClothoidSegment, Pose2D, RefRow, RefTable};
pub use robot::{Action, BodyTwist, IKParams, RobotState, SlipModel, WheelSpeeds};
pub use sensor::{BinaryImage, CameraModel, FeatureVec, MarkerKind};
pub use track::TrackSpec;
pub use tracking::{DoneReason, EpisodeRecord, RewardMode, RewardWeights, TerminationConfig};
