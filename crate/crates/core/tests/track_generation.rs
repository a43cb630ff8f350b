use lanekeep::geometry::{curvature_at, wrap_angle};
use lanekeep::track::{TrackParams, TrackSpec};

fn default_track() -> TrackSpec {
    TrackSpec::generate(&TrackParams::default()).expect("default track")
}

#[test]
fn default_track_bookkeeping() {
    let t = default_track();
    assert_eq!(t.ref_tables.len(), 10);
    assert_eq!(t.cones.lane1_cones.len(), 200);
    assert_eq!(t.cones.lane2_cones.len(), 200);

    let lengths: Vec<f64> = t.paths.iter().map(|p| p.total_length()).collect();
    let max = lengths.iter().cloned().fold(f64::MIN, f64::max);
    let min = lengths.iter().cloned().fold(f64::MAX, f64::min);
    assert!((max - min) / min < 0.01, "{lengths:?}");

    for (path, table) in t.paths.iter().zip(&t.ref_tables) {
        let sum: f64 = path.segments().iter().map(|s| s.length).sum();
        assert!((path.total_length() - sum).abs() < 1e-9);
        assert!(path.total_length() - table.final_s() <= table.spacing_ds + 1e-9);
        for w in table.rows.windows(2) {
            assert!((w[1].s - w[0].s - 0.1).abs() < 1e-9);
        }
    }
}

#[test]
fn rows_are_evenly_spaced_and_tangent() {
    let t = default_track();
    for table in &t.ref_tables {
        for w in table.rows.windows(2) {
            let dx = w[1].x - w[0].x;
            let dy = w[1].y - w[0].y;
            let chord = dx.hypot(dy);
            assert!((chord - 0.1).abs() < 0.001, "chord {chord}");
            let fd = dy.atan2(dx);
            let mid = w[0].theta + 0.5 * wrap_angle(w[1].theta - w[0].theta);
            let mid_err = wrap_angle(fd - mid).abs();
            assert!(mid_err < 5e-3, "chord vs mean heading {mid_err}");
        }
        for w in table.rows.windows(3) {
            let central = (w[2].y - w[0].y).atan2(w[2].x - w[0].x);
            assert!(wrap_angle(central - w[1].theta).abs() < 0.05);
        }
    }
}

#[test]
fn reference_curvature_covers_table_bins() {
    let t = default_track();
    let path = &t.paths[0];
    let n = 5000;
    let ks: Vec<f64> = (0..n)
        .map(|i| curvature_at(path, path.total_length() * i as f64 / n as f64).unwrap())
        .collect();
    for (lo, hi) in [
        (0.001, 0.2),
        (0.2, 0.4),
        (0.4, 0.6),
        (0.6, 0.8),
        (0.8, 0.99),
    ] {
        assert!(
            ks.iter().any(|&k| k >= lo && k < hi),
            "no samples in [{lo}, {hi})"
        );
    }
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(default_track(), default_track());
}
