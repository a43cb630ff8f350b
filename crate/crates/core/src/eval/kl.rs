use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::io::g6;
use crate::sensor::{distill, BinaryImage, CameraModel, MarkerKind, Renderer, Scene};
use crate::track::TrackSpec;
use crate::{Error, Result};

const KL_BINS: usize = 20;
const KL_SMOOTHING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub d: usize,
    pub kind: String,
    pub kl: f64,
}

impl KlRow {
    pub const CSV_HEADER: &'static str = "d,kind,kl";

    pub fn to_csv(rows: &[KlRow]) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in rows {
            s += &format!("{},{},{}\n", r.d, r.kind, g6(r.kl));
        }
        s
    }
}

/// Poses near the reference paths: a random row of a random table, shifted
/// sideways by up to 0.3 m and rotated by up to 0.1 rad.
pub fn sample_poses(track: &TrackSpec, samples: usize, seed: u64) -> Vec<Pose2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let table = &track.ref_tables[rng.random_range(0..track.ref_tables.len())];
            let row = table.rows[rng.random_range(0..table.len())];
            let lateral: f64 = rng.random_range(-0.3..=0.3);
            let dtheta: f64 = rng.random_range(-0.1..=0.1);
            let (s, c) = row.theta.sin_cos();
            Pose2D::new(row.x - s * lateral, row.y + c * lateral, row.theta + dtheta)
        })
        .collect()
}

/// Per-bin probabilities of values in `[0, 1]` with additive smoothing.
fn value_histogram(values: impl Iterator<Item = f64>) -> [f64; KL_BINS] {
    let mut counts = [0.0f64; KL_BINS];
    let mut n = 0.0f64;
    for v in values {
        counts[((v * KL_BINS as f64).floor().max(0.0) as usize).min(KL_BINS - 1)] += 1.0;
        n += 1.0;
    }
    let norm = 1.0 + KL_BINS as f64 * KL_SMOOTHING;
    counts.map(|c| (c / n.max(1.0) + KL_SMOOTHING) / norm)
}

/// `Σ p ln(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p / q).ln())
        .sum()
}

fn render_all(
    track: &TrackSpec,
    renderer: &Renderer,
    kind: MarkerKind,
    poses: &[Pose2D],
) -> Vec<BinaryImage> {
    let scene = Scene::from_track(track, kind, &[]);
    poses
        .par_iter()
        .map(|p| renderer.render(&scene, p, 0.0))
        .collect()
}

/// Mean per-dimension `KL(other ‖ reference)` of pooled features over the
/// same pose set, for every `d` in `sizes` and every kind in `others`.
pub fn feature_kl(
    track: &TrackSpec,
    camera: &CameraModel,
    reference: MarkerKind,
    others: &[MarkerKind],
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<KlRow>> {
    if samples < 100 {
        return Err(Error::domain("feature KL needs at least 100 samples"));
    }
    let poses = sample_poses(track, samples, seed);
    let renderer = Renderer::new(camera)?;
    let ref_imgs = render_all(track, &renderer, reference, &poses);
    let other_imgs: Vec<Vec<BinaryImage>> = others
        .iter()
        .map(|&k| render_all(track, &renderer, k, &poses))
        .collect();

    let per_dim = |imgs: &[BinaryImage], d: usize| -> Result<Vec<[f64; KL_BINS]>> {
        let feats: Vec<Vec<f64>> = imgs
            .iter()
            .map(|img| distill(img, d).map(|f| f.values))
            .collect::<Result<_>>()?;
        Ok((0..d)
            .map(|j| value_histogram(feats.iter().map(|f| f[j])))
            .collect())
    };

    let mut rows = Vec::new();
    for &d in sizes {
        let q = per_dim(&ref_imgs, d)?;
        for (kind, imgs) in others.iter().zip(&other_imgs) {
            let p = per_dim(imgs, d)?;
            let kl = p
                .iter()
                .zip(&q)
                .map(|(p, q)| kl_divergence(p, q))
                .sum::<f64>()
                / d as f64;
            rows.push(KlRow {
                d,
                kind: kind.name().to_string(),
                kl,
            });
        }
    }
    Ok(rows)
}
