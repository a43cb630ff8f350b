use serde::{Deserialize, Serialize};

use super::clothoid::{evaluate, ClothoidSegment};
use super::{wrap_angle, Pose2D};
use crate::{Error, Result};

const JUNCTION_TOL: f64 = 1e-6;

/// Concatenated clothoid segments indexed by cumulative arc length `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPath {
    segments: Vec<ClothoidSegment>,
    /// `cumulative_length[k]` is the arc length at the end of segment `k`.
    cumulative_length: Vec<f64>,
    closed: bool,
}

impl ArcPath {
    pub fn segments(&self) -> &[ClothoidSegment] {
        &self.segments
    }

    pub fn cumulative_length(&self) -> &[f64] {
        &self.cumulative_length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative_length.last().expect("non-empty path")
    }

    /// Segment index containing `s` and the local arc length within it.
    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let total = self.total_length();
        if !(s >= 0.0 && s <= total) {
            return Err(Error::domain(format!(
                "arc length {s} outside path [0, {total}]"
            )));
        }
        let k = self
            .cumulative_length
            .partition_point(|&c| c < s)
            .min(self.segments.len() - 1);
        let begin = if k == 0 {
            0.0
        } else {
            self.cumulative_length[k - 1]
        };
        let local = (s - begin).clamp(0.0, self.segments[k].length);
        Ok((k, local))
    }

    /// Pose at cumulative arc length `s`; heading is the unit-tangent angle.
    pub fn pose_at(&self, s: f64) -> Result<Pose2D> {
        let (k, local) = self.locate(s)?;
        Ok(evaluate(&self.segments[k], local))
    }
}

/// Chains G1-continuous segments into one path.
pub fn concat_path(segments: Vec<ClothoidSegment>, closed: bool) -> Result<ArcPath> {
    if segments.is_empty() {
        return Err(Error::domain("cannot build a path from zero segments"));
    }
    if let Some(bad) = segments.iter().position(|s| !(s.length > 0.0)) {
        return Err(Error::domain(format!(
            "segment {bad} has non-positive length"
        )));
    }
    let junction_ok = |junction: usize, a: &ClothoidSegment, b: &ClothoidSegment| {
        let end = a.end();
        let gap = end.distance(&b.start);
        let heading_gap = wrap_angle(end.theta - b.start.theta).abs();
        if gap > JUNCTION_TOL || heading_gap > JUNCTION_TOL {
            Err(Error::Continuity {
                junction,
                gap,
                heading_gap,
            })
        } else {
            Ok(())
        }
    };
    for (k, pair) in segments.windows(2).enumerate() {
        junction_ok(k, &pair[0], &pair[1])?;
    }
    if closed {
        let last = segments.len() - 1;
        junction_ok(last, &segments[last], &segments[0])?;
    }
    let mut cumulative_length = Vec::with_capacity(segments.len());
    let mut acc = 0.0;
    for seg in &segments {
        acc += seg.length;
        cumulative_length.push(acc);
    }
    Ok(ArcPath {
        segments,
        cumulative_length,
        closed,
    })
}

/// Unsigned curvature of the path at cumulative arc length `s`.
pub fn curvature_at(path: &ArcPath, s: f64) -> Result<f64> {
    let (k, local) = path.locate(s)?;
    Ok(path.segments[k].curvature(local).abs())
}
