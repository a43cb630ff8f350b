use serde::{Deserialize, Serialize};

use super::{ArcPath, Pose2D};
use crate::{Error, Result};

/// One distance-stamped reference pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefRow {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RefRow {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.theta)
    }
}

/// Reference poses sampled every `spacing_ds` metres of arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefTable {
    pub rows: Vec<RefRow>,
    pub spacing_ds: f64,
}

impl RefTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn final_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.s)
    }
}

/// Samples `path` at `S = 0, ds, 2ds, …`.
///
/// Open paths get a final row at the path end when the length is not a
/// multiple of `ds`; closed paths stop short of the end, which coincides
/// with row 0.
pub fn sample_reftable(path: &ArcPath, ds: f64) -> Result<RefTable> {
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(Error::domain(format!(
            "sample spacing {ds} must be positive"
        )));
    }
    let total = path.total_length();
    if total < ds {
        return Err(Error::domain(format!(
            "sample spacing {ds} exceeds path length {total}"
        )));
    }
    let eps = 1e-9;
    let mut rows = Vec::with_capacity((total / ds) as usize + 2);
    let mut k = 0usize;
    loop {
        let s = k as f64 * ds;
        let past_end = if path.is_closed() {
            s >= total - eps
        } else {
            s > total + eps
        };
        if past_end {
            break;
        }
        let p = path.pose_at(s.min(total))?;
        rows.push(RefRow {
            s,
            x: p.x,
            y: p.y,
            theta: p.theta,
        });
        k += 1;
    }
    if !path.is_closed() {
        let last = rows.last().expect("at least one row").s;
        if last < total - eps {
            let p = path.pose_at(total)?;
            rows.push(RefRow {
                s: total,
                x: p.x,
                y: p.y,
                theta: p.theta,
            });
        }
    }
    Ok(RefTable {
        rows,
        spacing_ds: ds,
    })
}

/// Index of the row whose `S` is closest to `s`, ties to the lower index.
/// Queries outside the table clamp to the nearest end.
///
/// # Panics
///
/// Panics on an empty table.
pub fn nearest_index(table: &RefTable, s: f64) -> usize {
    assert!(!table.rows.is_empty(), "nearest_index on empty table");
    let rows = &table.rows;
    let hi = rows.partition_point(|r| r.s < s);
    if hi == 0 {
        return 0;
    }
    if hi == rows.len() {
        return rows.len() - 1;
    }
    let lo = hi - 1;
    if (rows[hi].s - s).abs() < (rows[lo].s - s).abs() {
        hi
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::geometry::{concat_path, ClothoidSegment};

    fn linear_scan(table: &RefTable, s: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, r) in table.rows.iter().enumerate() {
            let d = (r.s - s).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    fn straight_table(len: f64, ds: f64) -> RefTable {
        let seg = ClothoidSegment::new(Pose2D::default(), 0.0, 0.0, len).unwrap();
        sample_reftable(&concat_path(vec![seg], false).unwrap(), ds).unwrap()
    }

    #[test]
    fn straight_path_rows() {
        let t = straight_table(2.0, 0.5);
        let s: Vec<f64> = t.rows.iter().map(|r| r.s).collect();
        assert_eq!(s, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!((t.rows[3].x - 1.5).abs() < 1e-12);
    }

    #[test]
    fn open_path_keeps_final_row() {
        let t = straight_table(1.05, 0.5);
        assert_eq!(t.len(), 4);
        assert!((t.final_s() - 1.05).abs() < 1e-12);
    }

    #[test]
    fn circle_quadrants() {
        let quarter = |theta: f64, x: f64, y: f64| {
            ClothoidSegment::new(Pose2D::new(x, y, theta), 1.0, 0.0, FRAC_PI_2).unwrap()
        };
        let segs = vec![
            quarter(0.0, 0.0, -1.0),
            quarter(FRAC_PI_2, 1.0, 0.0),
            quarter(PI, 0.0, 1.0),
            quarter(-FRAC_PI_2, -1.0, 0.0),
        ];
        let path = concat_path(segs, true).unwrap();
        let t = sample_reftable(&path, FRAC_PI_2).unwrap();
        assert_eq!(t.len(), 4);
        let expected = [
            (0.0, -1.0, 0.0),
            (1.0, 0.0, FRAC_PI_2),
            (0.0, 1.0, PI),
            (-1.0, 0.0, -FRAC_PI_2),
        ];
        for (r, (x, y, th)) in t.rows.iter().zip(expected) {
            assert!((r.x - x).abs() < 1e-9 && (r.y - y).abs() < 1e-9, "{r:?}");
            assert!(crate::geometry::wrap_angle(r.theta - th).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_spacing() {
        let seg = ClothoidSegment::new(Pose2D::default(), 0.0, 0.0, 1.0).unwrap();
        let path = concat_path(vec![seg], false).unwrap();
        assert!(sample_reftable(&path, 0.0).is_err());
        assert!(sample_reftable(&path, -1.0).is_err());
        assert!(sample_reftable(&path, 2.0).is_err());
    }

    #[test]
    fn nearest_cases() {
        let t = straight_table(2.0, 0.1);
        assert_eq!(nearest_index(&t, 0.234), linear_scan(&t, 0.234));
        assert_eq!(nearest_index(&t, 0.234), 2);
        assert_eq!(nearest_index(&t, t.rows[5].s), 5);
        assert_eq!(nearest_index(&t, 0.05), 0);
        assert_eq!(nearest_index(&t, -3.0), 0);
        assert_eq!(nearest_index(&t, 99.0), t.last_index());
    }

    proptest::proptest! {
        #[test]
        fn binary_search_matches_scan(
            gaps in proptest::collection::vec(0.001f64..1.0, 1..60),
            q in -1.0f64..40.0,
        ) {
            let mut s = 0.0;
            let rows = gaps
                .iter()
                .map(|g| {
                    let r = RefRow { s, x: 0.0, y: 0.0, theta: 0.0 };
                    s += g;
                    r
                })
                .collect();
            let t = RefTable { rows, spacing_ds: 0.1 };
            proptest::prop_assert_eq!(nearest_index(&t, q), linear_scan(&t, q));
        }
    }
}
