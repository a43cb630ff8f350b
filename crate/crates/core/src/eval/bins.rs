use serde::{Deserialize, Serialize};

use crate::geometry::{curvature_at, nearest_index};
use crate::io::g6;
use crate::track::TrackSpec;
use crate::tracking::EpisodeRecord;
use crate::{Error, Result};

/// Curvature edges of the controller comparison table.
pub const TABLE_BIN_EDGES: [f64; 6] = [0.001, 0.2, 0.4, 0.6, 0.8, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBin {
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub mean_e_x: f64,
    pub mean_v: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBinning {
    pub bins: Vec<CurvatureBin>,
    /// Samples whose curvature falls outside every bin.
    pub overflow: usize,
}

impl CurvatureBinning {
    pub const CSV_HEADER: &'static str = "kappa_lo,kappa_hi,mean_e_x,mean_v,samples";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for b in &self.bins {
            s += &format!(
                "{},{},{},{},{}\n",
                g6(b.kappa_lo),
                g6(b.kappa_hi),
                g6(b.mean_e_x),
                g6(b.mean_v),
                b.samples
            );
        }
        s
    }
}

/// Assigns every step to the bin of the path curvature at its nearest
/// reference row. Bins are half-open except the last, which includes its
/// upper edge. Empty bins report NaN means.
pub fn bin_by_curvature(
    records: &[EpisodeRecord],
    track: &TrackSpec,
    edges: &[f64],
) -> Result<CurvatureBinning> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("bin edges must be strictly increasing"));
    }
    let nb = edges.len() - 1;
    let mut sum_e = vec![0.0; nb];
    let mut sum_v = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    let mut overflow = 0;
    for rec in records {
        let table = track.ref_tables.get(rec.table_index).ok_or_else(|| {
            Error::domain(format!("record uses missing table {}", rec.table_index))
        })?;
        let path = &track.paths[rec.table_index];
        for step in &rec.steps {
            let row = &table.rows[nearest_index(table, step.s)];
            let kappa = curvature_at(path, row.s.clamp(0.0, path.total_length()))?;
            let last = edges[nb];
            let bin = if kappa == last {
                Some(nb - 1)
            } else if kappa >= edges[0] && kappa < last {
                Some(edges.partition_point(|&e| e <= kappa) - 1)
            } else {
                None
            };
            match bin {
                Some(b) => {
                    sum_e[b] += step.e_x;
                    sum_v[b] += step.v;
                    count[b] += 1;
                }
                None => overflow += 1,
            }
        }
    }
    let bins = (0..nb)
        .map(|b| {
            let n = count[b] as f64;
            CurvatureBin {
                kappa_lo: edges[b],
                kappa_hi: edges[b + 1],
                mean_e_x: sum_e[b] / n,
                mean_v: sum_v[b] / n,
                samples: count[b],
            }
        })
        .collect();
    Ok(CurvatureBinning { bins, overflow })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bin_width: f64,
    /// `counts[k]` covers `[k·w, (k+1)·w)`; the last bin is closed.
    pub counts: Vec<usize>,
    /// Moment-fit normal.
    pub mean: f64,
    pub std: f64,
}

impl ErrorHistogram {
    pub const CSV_HEADER: &'static str = "lo,hi,count";

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# mean={} std={}\n{}\n",
            g6(self.mean),
            g6(self.std),
            Self::CSV_HEADER
        );
        for (k, c) in self.counts.iter().enumerate() {
            let lo = k as f64 * self.bin_width;
            s += &format!("{},{},{c}\n", g6(lo), g6(lo + self.bin_width));
        }
        s
    }
}

/// Histogram of non-negative values with a fitted normal.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<ErrorHistogram> {
    if !(bin_width > 0.0) {
        return Err(Error::domain("histogram bin width must be positive"));
    }
    if values.is_empty() {
        return Ok(ErrorHistogram {
            bin_width,
            counts: vec![],
            mean: f64::NAN,
            std: f64::NAN,
        });
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::domain(
            "histogram values must be finite and non-negative",
        ));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let nb = ((max / bin_width).ceil() as usize).max(1);
    let mut counts = vec![0usize; nb];
    for &v in values {
        counts[((v / bin_width).floor() as usize).min(nb - 1)] += 1;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorHistogram {
        bin_width,
        counts,
        mean,
        std: var.sqrt(),
    })
}

/// Histogram of every step's position error.
pub fn error_histogram(records: &[EpisodeRecord], bin_width: f64) -> Result<ErrorHistogram> {
    let values: Vec<f64> = records
        .iter()
        .flat_map(|r| r.steps.iter().map(|s| s.e_x))
        .collect();
    histogram(&values, bin_width)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 1.0], 0.5).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.mean, 0.5);
        let same = histogram(&[0.7; 5], 0.5).unwrap();
        assert_eq!(same.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(same.std, 0.0);
        assert!(histogram(&[0.1], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn histogram_conserves_and_fits_mean(values in proptest::collection::vec(0.0f64..3.0, 1..200), w in 0.01f64..1.0) {
            let h = histogram(&values, w).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert!((h.mean - mean).abs() < 1e-12);
        }
    }
}
