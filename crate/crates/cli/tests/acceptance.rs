//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lanekeep::controllers::{
    nmpc_step, ControllerConfig, ControllerKind, MPCConfig, OracleActor, PDGains,
};
use lanekeep::eval::{
    bin_by_curvature, feature_kl, normalized_error, run_eval, sweep, Experiment, SweepContext,
    SweepGrid, TABLE_BIN_EDGES,
};
use lanekeep::geometry::{fit_clothoid, nearest_index, point_at, wrap_angle};
use lanekeep::policy::{cem_train, ActionSpace, CEMConfig, LinearPolicy};
use lanekeep::robot::{body_to_wheel, ik_wheel_to_body, integrate_pose, step_dynamics};
use lanekeep::track::{TrackParams, TrackShape, TrackSpec};
use lanekeep::tracking::{
    check_termination, orientation_error, run_episode, select_waypoint, step_reward, DoneReason,
    EnvConfig, RewardMode, RewardWeights, TerminationConfig, World,
};
use lanekeep::{Action, BodyTwist, MarkerKind, Pose2D, RobotState, SlipModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn figure_eight() -> TrackSpec {
    TrackSpec::generate(&TrackParams::default()).unwrap()
}

fn reward_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = RewardWeights::default();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100_000 {
        let a = BodyTwist::new(rng.random_range(0.1..=1.0), rng.random_range(-0.5..=0.5));
        let r = step_reward(
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            &a,
            &w,
        );
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let mut env = EnvConfig::default();
    env.weights.v_desired = 0.15;
    let world = World::new(figure_eight().with_ds(0.01).unwrap(), env).unwrap();
    let rec = run_episode(&world, &mut OracleActor, 0).unwrap();
    let ret = rec.episode_return();
    check(
        lo >= 0.0 && hi <= 5.0 && rec.len() == 1000 && (4500.0..=5000.0).contains(&ret),
        format!(
            "step reward in [{lo:.4}, {hi:.4}]; oracle return {ret:.1} over {} steps",
            rec.len()
        ),
    )
}

fn orientation_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a = rng.random_range(-10.0..10.0);
        let b = rng.random_range(-10.0..10.0);
        let expected = 1.0 - (wrap_angle(a - b) / 2.0).cos();
        worst = worst.max((orientation_error(a, b) - expected).abs());
    }
    let angle = 2.0 * 0.9f64.acos();
    let cfg = TerminationConfig::default();
    let at = orientation_error(angle, 0.0);
    let trips = check_termination(0.0, orientation_error(angle + 1e-9, 0.0), 1, &cfg)
        == DoneReason::Orientation;
    let below =
        check_termination(0.0, orientation_error(angle - 1e-6, 0.0), 1, &cfg) == DoneReason::None;
    check(
        worst <= 1e-12 && (angle - 0.902054).abs() < 1e-6 && (at - 0.1).abs() < 1e-9 && trips && below,
        format!("max closed-form deviation {worst:.2e}; limit angle {angle:.9} rad, e_theta there {at:.12}"),
    )
}

fn clothoid_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut wp, mut wt): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let start = Pose2D::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-PI..PI),
        );
        let dist = rng.random_range(0.1..5.0);
        let dir: f64 = rng.random_range(-PI..PI);
        let end = Pose2D::new(
            start.x + dist * dir.cos(),
            start.y + dist * dir.sin(),
            start.theta + rng.random_range(-2.0..2.0),
        );
        let seg = match fit_clothoid(start, end) {
            Ok(s) => s,
            Err(e) => return Err(format!("fit failed: {e}")),
        };
        let got = point_at(&seg, seg.length).unwrap();
        wp = wp.max(got.distance(&end));
        wt = wt.max(wrap_angle(got.theta - end.theta).abs());
    }
    let q = fit_clothoid(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 1.0, FRAC_PI_2)).unwrap();
    let dk = (q.kappa0 - 1.0).abs().max(q.kappa_rate.abs());
    let dl = (q.length - FRAC_PI_2).abs();
    check(
        wp <= 1e-6 && wt <= 1e-6 && dk <= 1e-6 && dl <= 1e-6,
        format!(
            "endpoint error {wp:.2e} m / {wt:.2e} rad; quarter circle |dk| {dk:.2e}, |dL| {dl:.2e}"
        ),
    )
}

fn index_search() -> Outcome {
    let track = figure_eight().with_ds(0.01).unwrap();
    let table = &track.ref_tables[0];
    let oracle = |s: f64| {
        let mut best = 0;
        for (i, r) in table.rows.iter().enumerate() {
            if (r.s - s).abs() < (table.rows[best].s - s).abs() {
                best = i;
            }
        }
        best
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let total = table.final_s();
    let mut mismatches = 0;
    for q in 0..10_000 {
        let s = match q % 4 {
            0 => {
                let i = rng.random_range(0..table.last_index());
                0.5 * (table.rows[i].s + table.rows[i + 1].s)
            }
            1 => table.rows[rng.random_range(0..table.len())].s,
            _ => rng.random_range(-1.0..total + 1.0),
        };
        if nearest_index(table, s) != oracle(s) {
            mismatches += 1;
        }
    }
    let mut alpha_bad = 0;
    for alpha in 0..=4 {
        for _ in 0..500 {
            let s = rng.random_range(-1.0..total + 1.0);
            if select_waypoint(table, s, alpha).1 != (oracle(s) + alpha).min(table.last_index()) {
                alpha_bad += 1;
            }
        }
    }
    check(
        mismatches == 0 && alpha_bad == 0,
        format!("{mismatches} nearest-index mismatches in 10000; {alpha_bad} look-ahead mismatches in 2500"),
    )
}

fn kinematics() -> Outcome {
    let ik = lanekeep::IKParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = BodyTwist::new(rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0));
        let back = ik_wheel_to_body(body_to_wheel(t, &ik), &ik);
        worst = worst
            .max((back.v - t.v).abs())
            .max((back.omega - t.omega).abs());
    }
    let (v, w, dt) = (0.6, 0.4, 0.05);
    let mut pose = Pose2D::new(0.0, 0.0, 0.0);
    let mut circle: f64 = 0.0;
    for k in 1..=400 {
        pose = integrate_pose(pose, BodyTwist::new(v, w), dt);
        let th = w * dt * k as f64;
        let r = v / w;
        let exact = (r * th.sin(), r * (1.0 - th.cos()));
        circle = circle.max((pose.x - exact.0).hypot(pose.y - exact.1));
    }
    let half = SlipModel {
        traversal_gain: 0.5,
        omega_gain: 1.0,
    };
    let mut a = RobotState::default();
    let mut b = RobotState::default();
    let (mut la, mut lb) = (0.0, 0.0);
    for _ in 0..100 {
        let na = step_dynamics(
            &a,
            Action::Body(BodyTwist::new(0.8, 0.0)),
            dt,
            &SlipModel::default(),
            &ik,
        )
        .unwrap();
        let nb = step_dynamics(&b, Action::Body(BodyTwist::new(0.8, 0.0)), dt, &half, &ik).unwrap();
        la += na.pose.distance(&a.pose);
        lb += nb.pose.distance(&b.pose);
        a = na;
        b = nb;
    }
    check(
        worst <= 1e-12 && circle <= 1e-9 && lb == 0.5 * la,
        format!("IK round trip {worst:.2e}; circle deviation {circle:.2e} m; arc {lb} vs {la}"),
    )
}

fn circle_track(radius: f64, lane_width: f64) -> TrackSpec {
    TrackSpec::generate(&TrackParams {
        shape: TrackShape::Circle { radius },
        min_separation: lane_width,
        ..TrackParams::default()
    })
    .unwrap()
}

fn pure_pursuit_circle() -> Outcome {
    let world = World::new(
        circle_track(5.0, 1.3).with_ds(0.01).unwrap(),
        EnvConfig::default(),
    )
    .unwrap();
    let cc = ControllerConfig {
        kind: ControllerKind::PurePursuit,
        ..Default::default()
    };
    let mut actor = cc.build(None).unwrap();
    let rec = run_episode(&world, actor.as_mut(), 0).unwrap();
    let tail = &rec.steps[rec.len() / 2..];
    let max_ex = tail.iter().map(|s| s.e_x).fold(0.0, f64::max);
    let max_radial = tail
        .iter()
        .map(|s| (s.x.hypot(s.y) - 5.0).abs())
        .fold(0.0, f64::max);
    check(
        max_radial < 0.25,
        format!(
            "steady-state max cross-track offset {max_radial:.4} m over steps {}..{} (end: {}); \
             arc-length-indexed e_x reaches {max_ex:.4} m",
            rec.len() / 2,
            rec.len(),
            rec.done_reason.as_str()
        ),
    )
}

fn mpc_straight() -> Outcome {
    let cfg = MPCConfig::default();
    let dt = 0.05;
    let speed = 0.75;
    let ik = lanekeep::IKParams::default();
    let mut state = RobotState::at(Pose2D::new(0.0, 0.3, 0.0));
    let mut inside = true;
    let mut reached = None;
    let mut worst_after: f64 = 0.0;
    for step in 0..200 {
        let t = step as f64 * dt;
        let reference: Vec<Pose2D> = (1..=cfg.horizon_n)
            .map(|k| {
                state
                    .pose
                    .relative(&Pose2D::new(speed * (t + k as f64 * cfg.dt), 0.0, 0.0))
            })
            .collect();
        let u = match nmpc_step(&state, &reference, &cfg) {
            Ok(u) => u,
            Err(e) => return Err(format!("solver failed at t={t:.2}: {e}")),
        };
        inside &= u.v >= cfg.v_box[0] && u.v <= cfg.v_box[1];
        inside &= u.omega >= cfg.omega_box[0] && u.omega <= cfg.omega_box[1];
        state = step_dynamics(&state, Action::Body(u), dt, &SlipModel::default(), &ik).unwrap();
        let t1 = t + dt;
        let e_x = (state.pose.x - speed * t1).hypot(state.pose.y);
        if reached.is_none() && e_x < 0.02 {
            reached = Some(t1);
        }
        if reached.is_some() {
            worst_after = worst_after.max(e_x);
        }
    }
    check(
        inside && reached.is_some_and(|t| t <= 5.0) && worst_after < 0.02,
        format!(
            "reached |e_x| < 0.02 at t = {}; max after {worst_after:.4} m; actions inside boxes: {inside}",
            reached.map_or("never".into(), |t| format!("{t:.2} s"))
        ),
    )
}

fn pd_corridor() -> Outcome {
    let radius = 8.0;
    let track = circle_track(radius, 1.5);
    let lap = track.paths[0].total_length();
    let mut env = EnvConfig::default();
    env.termination.max_steps = 3000;
    let world = World::new(track, env).unwrap();
    let mut actor = lanekeep::controllers::PdActor::new(PDGains::default());
    let mut ep = lanekeep::tracking::Episode::reset(&world, 0);
    let mut worst: f64 = 0.0;
    let mut reason = DoneReason::None;
    use lanekeep::tracking::Actor;
    while ep.state().s < lap {
        let a = actor.act(&ep.observation()).unwrap();
        let out = ep.step(a).unwrap();
        let p = ep.robot().pose;
        worst = worst.max((p.x.hypot(p.y) - radius).abs());
        if out.done() {
            reason = out.done_reason;
            break;
        }
    }
    let s = ep.state().s;
    check(
        s >= lap && worst < 0.75,
        format!(
            "travelled {s:.2} of {lap:.2} m in {} steps (end: {}); max |lateral offset| {worst:.4} m",
            ep.state().t,
            if reason == DoneReason::None { "lap complete" } else { reason.as_str() }
        ),
    )
}

fn train(mode: RewardMode, seed: u64, iterations: usize) -> LinearPolicy {
    let world = World::new(figure_eight(), EnvConfig::default()).unwrap();
    let cfg = CEMConfig {
        iterations,
        seed,
        ..CEMConfig::default()
    };
    cem_train(&world, mode, ActionSpace::BodyTwist, &cfg)
        .unwrap()
        .0
}

fn eval_policy(
    policy: &LinearPolicy,
    env: EnvConfig,
) -> (lanekeep::eval::MetricsRow, Vec<DoneReason>) {
    let world = World::new(figure_eight().with_ds(0.01).unwrap(), env).unwrap();
    let cc = ControllerConfig {
        kind: ControllerKind::Policy,
        ..Default::default()
    };
    let make = || cc.build(Some(policy));
    let (records, m) = run_eval(&world, &make, 20, 7).unwrap();
    (m, records.iter().map(|r| r.done_reason).collect())
}

const CEM_ITERATIONS: usize = 30;

fn wpg_vs_icg(policies: &BTreeMap<(u64, &str), LinearPolicy>) -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let (w, _) = eval_policy(&policies[&(seed, "wpg")], EnvConfig::default());
        let (i, _) = eval_policy(&policies[&(seed, "icg")], EnvConfig::default());
        let win = w.mean_e_x <= i.mean_e_x && w.s_term >= i.s_term;
        wins += win as usize;
        lines.push(format!(
            "seed {seed}: WpG e_x {:.4} S {:.3} | ICG e_x {:.4} S {:.3}",
            w.mean_e_x, w.s_term, i.mean_e_x, i.s_term
        ));
    }
    check(
        wins >= 2,
        format!("{wins}/3 seeds favour WpG ({})", lines.join("; ")),
    )
}

fn frequency_trend(policy: &LinearPolicy) -> Outcome {
    let mut ex = Vec::new();
    let mut early_1hz = 0;
    for hz in [20, 4, 2, 1] {
        let env = EnvConfig {
            source_hz: hz,
            ..EnvConfig::default()
        };
        let (m, reasons) = eval_policy(policy, env);
        ex.push(m.mean_e_x);
        if hz == 1 {
            early_1hz = reasons
                .iter()
                .filter(|r| **r != DoneReason::MaxSteps)
                .count();
        }
    }
    let monotone = ex[0] <= 1.1 * ex[1] && ex[1] <= 1.1 * ex[2];
    check(
        monotone && early_1hz >= 10,
        format!(
            "mean e_x 20/4/2/1 Hz = {:.4}/{:.4}/{:.4}/{:.4}; early terminations at 1 Hz {early_1hz}/20",
            ex[0], ex[1], ex[2], ex[3]
        ),
    )
}

fn sweep_plumbing() -> Outcome {
    let ctx = SweepContext {
        track: figure_eight(),
        eval_ds: 0.01,
        env: EnvConfig::default(),
        controller: ControllerConfig {
            kind: ControllerKind::PurePursuit,
            ..Default::default()
        },
        policy: None,
        cem: CEMConfig::default(),
        action_space: ActionSpace::BodyTwist,
        reward_mode: RewardMode::Wpg,
        episodes: 1,
        seed: 3,
        grid: SweepGrid::default(),
    };
    let report = sweep(Experiment::WaypointSpacing, &ctx).unwrap();
    let csv = report.to_csv();
    let header_ok = csv.starts_with("ds,v_d,mean_e_x,mean_e_theta,mean_e_v,S_term,N,mean_reward\n");
    let n = normalized_error(0.1630, 0.0950, 21.213).unwrap();
    check(
        report.rows.len() == 25
            && csv.lines().count() == 26
            && header_ok
            && (n - 0.012162).abs() <= 1e-6,
        format!("{} rows; N = {n:.7}", report.rows.len()),
    )
}

fn curvature_bins() -> Outcome {
    let track = figure_eight().with_ds(0.01).unwrap();
    let mut env = EnvConfig::default();
    env.weights.v_desired = 0.15;
    let world = World::new(track, env).unwrap();
    let make = || {
        ControllerConfig {
            kind: ControllerKind::Oracle,
            ..Default::default()
        }
        .build(None)
    };
    let (records, _) = run_eval(&world, &make, 40, 11).unwrap();
    let bins = bin_by_curvature(&records, &world.track, &TABLE_BIN_EDGES).unwrap();
    let total: usize = records.iter().map(|r| r.len()).sum();
    let counted: usize = bins.bins.iter().map(|b| b.samples).sum::<usize>() + bins.overflow;
    let counts: Vec<usize> = bins.bins.iter().map(|b| b.samples).collect();
    check(
        counted == total && counts.iter().all(|&c| c >= 100),
        format!(
            "bin samples {counts:?}, overflow {}, total {total}",
            bins.overflow
        ),
    )
}

fn marker_generalization(policy: &LinearPolicy) -> Outcome {
    let (cones, _) = eval_policy(policy, EnvConfig::default());
    let solid_env = EnvConfig {
        marker: MarkerKind::SOLID_LANE,
        ..EnvConfig::default()
    };
    let (solid, _) = eval_policy(policy, solid_env);
    let ratio = solid.s_term / cones.s_term;

    let track = figure_eight();
    let cam = EnvConfig::default().camera;
    let sizes = [16, 32, 64, 128, 256, 512, 1024, 2048];
    let same = feature_kl(
        &track,
        &cam,
        MarkerKind::CONE,
        &[MarkerKind::CONE],
        &sizes,
        100,
        5,
    )
    .unwrap();
    let max_self = same.iter().map(|r| r.kl.abs()).fold(0.0, f64::max);
    let other = feature_kl(
        &track,
        &cam,
        MarkerKind::CONE,
        &[MarkerKind::SOLID_LANE],
        &sizes,
        100,
        5,
    )
    .unwrap();
    let emitted: Vec<usize> = other.iter().map(|r| r.d).collect();
    check(
        ratio >= 0.8 && max_self <= 1e-12 && emitted == sizes,
        format!(
            "S_term solid {:.3} / cones {:.3} = {ratio:.3}; self-KL max {max_self:.1e}; KL sizes {emitted:?}",
            solid.s_term, cones.s_term
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lanekeep"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let config = root.join("run.toml");
    std::fs::write(
        &config,
        "episodes = 3\nseed = 9\n\n[controller]\nkind = \"pure_pursuit\"\n\n[cem]\niterations = 2\npopulation = 8\nepisodes_per_candidate = 1\n\n[features]\nsizes = [16, 64]\nsamples = 100\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    for (k, jobs) in [(0, "1"), (1, "2")] {
        let out = root.join(format!("out{k}"));
        let o = |p: &str| out.join(p).display().to_string();
        let track = o("track");
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "gen-track",
            "--out",
            &track,
        ])?;
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "run",
            "--track",
            &track,
            "--out",
            &o("run"),
        ])?;
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "train",
            "--track",
            &track,
            "--out",
            &o("train/policy.csv"),
        ])?;
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "eval",
            "--track",
            &track,
            "--out",
            &o("eval"),
            "--set",
            "controller.kind=policy",
            "--policy",
            &o("train/policy.csv"),
        ])?;
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "sweep",
            "--experiment",
            "input_frequency",
            "--out",
            &o("sweep"),
        ])?;
        run_cli(&[
            "--jobs",
            jobs,
            "--config",
            cfg,
            "features",
            "--out",
            &o("features"),
        ])?;
    }
    let a = tree(&root.join("out0"));
    let b = tree(&root.join("out1"));
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    check(
        a.len() == b.len() && differing.is_empty() && a.len() > 20,
        format!(
            "{} files compared across two runs ({} differ)",
            a.len(),
            differing.len()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, t: Instant, r: Outcome| {
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    };
    let quick: [Criterion; 11] = [
        ("reward_bounds", reward_bounds),
        ("orientation_closed_form", orientation_closed_form),
        ("clothoid_g1", clothoid_suite),
        ("index_search", index_search),
        ("kinematics", kinematics),
        ("pure_pursuit_circle", pure_pursuit_circle),
        ("nmpc_straight", mpc_straight),
        ("pd_corridor_lap", pd_corridor),
        ("sweep_plumbing", sweep_plumbing),
        ("curvature_bins", curvature_bins),
        ("determinism", determinism),
    ];
    for (name, f) in quick {
        let t = Instant::now();
        report(name, t, f());
    }

    let t = Instant::now();
    let mut policies = BTreeMap::new();
    for seed in 1..=3u64 {
        policies.insert((seed, "wpg"), train(RewardMode::Wpg, seed, CEM_ITERATIONS));
        policies.insert((seed, "icg"), train(RewardMode::Icg, seed, CEM_ITERATIONS));
    }
    println!(
        "      trained 6 policies ({CEM_ITERATIONS} CEM iterations each) in {:.1}s",
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    report("wpg_vs_icg", t, wpg_vs_icg(&policies));
    let t = Instant::now();
    report(
        "frequency_trend",
        t,
        frequency_trend(&policies[&(1, "wpg")]),
    );
    let t = Instant::now();
    report(
        "marker_generalization",
        t,
        marker_generalization(&policies[&(1, "wpg")]),
    );

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
