use std::path::Path;
use std::process::{Command, Output};

use lanekeep::io::{load_track_bundle, read_numeric_csv};
use lanekeep::policy::LinearPolicy;

fn lanekeep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanekeep"))
        .args(args)
        .output()
        .expect("spawn lanekeep")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_track_default_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    assert!(lanekeep(&["gen-track", "--out", path(&out)])
        .status
        .success());
    let reftables = (0..20)
        .filter(|k| out.join(format!("reftable_{k}.csv")).exists())
        .count();
    assert_eq!(reftables, 10);
    let cones = read_numeric_csv(&out.join("cones.csv"), "cones", "lane,x,y").unwrap();
    assert_eq!(cones.iter().filter(|r| r[0] == 1.0).count(), 200);
    assert_eq!(cones.iter().filter(|r| r[0] == 2.0).count(), 200);
    assert!(out.join("track.toml").exists());
    let track = load_track_bundle(&out).unwrap();
    assert_eq!(track.ref_tables.len(), 10);
}

#[test]
fn gen_track_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for o in [&a, &b] {
        assert!(
            lanekeep(&["gen-track", "--set", "track.seed=5", "--out", path(o)])
                .status
                .success()
        );
    }
    for f in ["cones.csv", "centers.csv", "reftable_3.csv", "track.toml"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn run_writes_episodes_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let track = dir.path().join("t");
    let out = dir.path().join("run");
    assert!(lanekeep(&["gen-track", "--out", path(&track)])
        .status
        .success());
    let o = lanekeep(&[
        "run",
        "--track",
        path(&track),
        "--out",
        path(&out),
        "--episodes",
        "2",
        "--set",
        "controller.kind=pure_pursuit",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ep = std::fs::read_to_string(out.join("episode_000.csv")).unwrap();
    assert!(ep.starts_with("t,x,y,theta,v,omega,a_v,a_omega,S,i_star,e_x,e_theta,e_V,reward\n"));
    assert!(ep.trim_end().ends_with("# done_reason=max_steps"));
    assert!(out.join("episode_001.csv").exists());
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
}

#[test]
fn policy_without_file_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let track = dir.path().join("t");
    assert!(lanekeep(&["gen-track", "--out", path(&track)])
        .status
        .success());
    let o = lanekeep(&[
        "run",
        "--track",
        path(&track),
        "--out",
        path(&dir.path().join("r")),
        "--set",
        "controller.kind=policy",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("policy_file"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanekeep(&["sweep", "--experiment", "nope", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown experiment"));
    let o = lanekeep(&[
        "gen-track",
        "--out",
        path(dir.path()),
        "--set",
        "track.bogus=1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("track.bogus"));
    assert_eq!(lanekeep(&["frobnicate"]).status.code(), Some(1));
    let missing = dir.path().join("missing");
    let o = lanekeep(&["run", "--track", path(&missing), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_controller_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let track = dir.path().join("t");
    assert!(lanekeep(&["gen-track", "--out", path(&track)])
        .status
        .success());
    let o = lanekeep(&[
        "run",
        "--track",
        path(&track),
        "--out",
        path(&dir.path().join("r")),
        "--episodes",
        "1",
        "--set",
        "controller.kind=nmpc",
        "--set",
        "controller.nmpc.max_iterations=1",
        "--set",
        "controller.max_infeasible=0",
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn train_zero_iterations_writes_initial_policy() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["wpg", "icg"] {
        let out = dir.path().join(format!("{mode}.csv"));
        let o = lanekeep(&[
            "train",
            "--out",
            path(&out),
            "--iterations",
            "0",
            "--set",
            &format!("env.reward_mode={mode}"),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let p = LinearPolicy::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(p.feature_dim, 64);
        assert!(p.params().iter().all(|&v| v == 0.0));
        let curve = std::fs::read_to_string(dir.path().join(format!("{mode}_curve.csv"))).unwrap();
        assert_eq!(
            curve.lines().next(),
            Some("iteration,elite_mean,population_mean")
        );
    }
}

#[test]
fn sweep_frequency_rows_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanekeep(&[
        "sweep",
        "--experiment",
        "input_frequency",
        "--out",
        path(dir.path()),
        "--plot",
        "--set",
        "controller.kind=pure_pursuit",
        "--set",
        "episodes=1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("input_frequency.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let svg = std::fs::read_to_string(dir.path().join("input_frequency.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_file_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let mut c = lanekeep::config::RunConfig::default();
    c.track.seed = 12;
    c.save(&cfg).unwrap();
    let back = lanekeep::config::RunConfig::load(&cfg).unwrap();
    assert_eq!(back, c);
    let out = dir.path().join("t");
    assert!(
        lanekeep(&["--config", path(&cfg), "gen-track", "--out", path(&out)])
            .status
            .success()
    );
    assert_eq!(load_track_bundle(&out).unwrap().params.seed, 12);
}
