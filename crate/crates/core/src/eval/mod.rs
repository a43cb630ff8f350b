//! Experiment harness: metric aggregation, curvature bins, error
//! histograms, the feature KL study and parameter sweeps.

mod bins;
mod kl;
mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bins::{
    bin_by_curvature, error_histogram, histogram, CurvatureBin, CurvatureBinning, ErrorHistogram,
    TABLE_BIN_EDGES,
};
pub use kl::{feature_kl, kl_divergence, sample_poses, KlRow};
pub use sweep::{sweep, Experiment, SweepContext, SweepGrid, SweepReport, SweepRow};

use crate::io::g6;
use crate::tracking::{run_episode, Actor, EpisodeRecord, RewardWeights, World};
use crate::{Error, Result};

/// Builds a fresh actor for each episode.
pub type ActorFactory<'a> = dyn Fn() -> Result<Box<dyn Actor + Send>> + Sync + 'a;

/// Aggregated tracking metrics over a batch of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Step-weighted mean position error.
    pub mean_e_x: f64,
    pub mean_e_theta: f64,
    /// Step-weighted mean of the normalised speed error `|v − v_d|/v_max`.
    pub mean_e_v: f64,
    /// Step-weighted mean of `v − v_d`: positive means faster than desired.
    pub mean_e_v_signed: f64,
    /// Mean arc length travelled before termination.
    pub s_term: f64,
    pub n: f64,
    /// Mean episodic return.
    pub mean_reward: f64,
    pub episodes: usize,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "mean_e_x,mean_e_theta,mean_e_v,S_term,N,mean_reward";

    pub fn csv_cells(&self) -> String {
        [
            self.mean_e_x,
            self.mean_e_theta,
            self.mean_e_v,
            self.s_term,
            self.n,
            self.mean_reward,
        ]
        .iter()
        .map(|&v| g6(v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// `|mean_e_x + mean_e_v| / S_term`.
pub fn normalized_error(mean_e_x: f64, mean_e_v: f64, s_term: f64) -> Result<f64> {
    if !(s_term > 0.0) {
        return Err(Error::UndefinedMetric(
            "normalized error needs a positive S_term",
        ));
    }
    Ok((mean_e_x + mean_e_v).abs() / s_term)
}

/// Pools every step of every record.
pub fn aggregate(records: &[EpisodeRecord], weights: &RewardWeights) -> Result<MetricsRow> {
    let steps: usize = records.iter().map(|r| r.len()).sum();
    if steps == 0 {
        return Err(Error::UndefinedMetric("no steps to aggregate"));
    }
    let mean = |f: &dyn Fn(&crate::tracking::StepRecord) -> f64| {
        records.iter().flat_map(|r| &r.steps).map(f).sum::<f64>() / steps as f64
    };
    let mean_e_x = mean(&|s| s.e_x);
    let mean_e_v = mean(&|s| s.e_v);
    let s_term = records.iter().map(|r| r.final_s()).sum::<f64>() / records.len() as f64;
    Ok(MetricsRow {
        mean_e_x,
        mean_e_theta: mean(&|s| s.e_theta),
        mean_e_v,
        mean_e_v_signed: mean(&|s| s.v - weights.v_desired),
        s_term,
        n: normalized_error(mean_e_x, mean_e_v, s_term)?,
        mean_reward: records.iter().map(|r| r.episode_return()).sum::<f64>() / records.len() as f64,
        episodes: records.len(),
    })
}

/// Per-episode seeds derived from a batch seed.
pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes).map(|_| rng.random()).collect()
}

/// Runs `episodes` seeded episodes in parallel and aggregates them.
pub fn run_eval(
    world: &World,
    make: &ActorFactory<'_>,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<EpisodeRecord>, MetricsRow)> {
    if episodes == 0 {
        return Err(Error::domain("evaluation needs at least one episode"));
    }
    let records: Vec<EpisodeRecord> = episode_seeds(seed, episodes)
        .into_par_iter()
        .map(|s| {
            let mut actor = make()?;
            run_episode(world, actor.as_mut(), s)
        })
        .collect::<Result<_>>()?;
    let row = aggregate(&records, &world.cfg.weights)?;
    Ok((records, row))
}
