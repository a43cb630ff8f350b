//! `lanekeep`: track generation, simulation, training, evaluation and sweeps.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lanekeep::config::RunConfig;
use lanekeep::controllers::ControllerKind;
use lanekeep::eval::{
    bin_by_curvature, error_histogram, feature_kl, run_eval, sweep, Experiment, KlRow, MetricsRow,
    SweepContext, TABLE_BIN_EDGES,
};
use lanekeep::io::{episode_csv, g6, load_track_bundle, save_track_bundle, write_file};
use lanekeep::policy::{cem_train, LinearPolicy};
use lanekeep::track::TrackSpec;
use lanekeep::tracking::World;

#[derive(Parser)]
#[command(
    name = "lanekeep",
    version,
    about = "Skid-steer lane-keeping simulator and benchmarks"
)]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set track.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrackArg {
    /// Track bundle directory; generated from the configuration when omitted.
    #[arg(long)]
    track: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a track bundle.
    GenTrack {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run episodes and write one CSV per episode plus metrics.csv.
    Run {
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Train a linear policy with the cross-entropy method.
    Train {
        #[command(flatten)]
        track: TrackArg,
        /// Policy CSV to write; the curve goes next to it as `<stem>_curve.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate the configured controller on the evaluation track.
    Eval {
        #[command(flatten)]
        track: TrackArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Position-error histogram bin width (m).
        #[arg(long, default_value_t = 0.02)]
        hist_width: f64,
    },
    /// Run one experiment grid.
    Sweep {
        #[command(flatten)]
        track: TrackArg,
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also write an SVG plot of the report.
        #[arg(long)]
        plot: bool,
    },
    /// Feature-distribution KL study across marker kinds.
    Features {
        #[command(flatten)]
        track: TrackArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e
                .chain()
                .any(|c| matches!(c.downcast_ref(), Some(lanekeep::Error::Infeasible { .. })));
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let mut overrides = cli.overrides.clone();
    let mut flag = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push(format!("{key}={v}"));
        }
    };
    match &cli.command {
        Command::Run {
            episodes, policy, ..
        }
        | Command::Eval {
            episodes, policy, ..
        } => {
            flag("episodes", episodes.map(|e| e.to_string()));
            flag("policy_file", policy.as_ref().map(|p| quoted(p)));
        }
        Command::Sweep { policy, .. } => flag("policy_file", policy.as_ref().map(|p| quoted(p))),
        Command::Train { iterations, .. } => {
            flag("cem.iterations", iterations.map(|i| i.to_string()))
        }
        _ => {}
    }
    let cfg = RunConfig::load_with_overrides(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::GenTrack { out } => {
            let track = TrackSpec::generate(&cfg.track)?;
            save_track_bundle(&out, &track)?;
        }
        Command::Run { track, out, .. } => {
            let track = load_track_bundle(&track)
                .with_context(|| format!("loading track bundle {}", track.display()))?;
            let (records, metrics, _) = evaluate(&cfg, track)?;
            for (k, r) in records.iter().enumerate() {
                write_file(&out.join(format!("episode_{k:03}.csv")), episode_csv(r))?;
            }
            write_file(&out.join("metrics.csv"), metrics_csv(&metrics))?;
        }
        Command::Train { track, out, .. } => {
            let track = resolve_track(&cfg, &track)?;
            let world = World::new(track, cfg.env.clone())?;
            let (policy, curve) =
                cem_train(&world, cfg.env.reward_mode, cfg.action_space, &cfg.cem)?;
            write_file(&out, policy.to_csv())?;
            let mut s = String::from("iteration,elite_mean,population_mean\n");
            for c in &curve {
                s += &format!(
                    "{},{},{}\n",
                    c.iteration,
                    g6(c.elite_mean),
                    g6(c.population_mean)
                );
            }
            write_file(&curve_path(&out), s)?;
        }
        Command::Eval {
            track,
            out,
            hist_width,
            ..
        } => {
            let track = resolve_track(&cfg, &track)?.with_ds(cfg.eval_ds)?;
            let (records, metrics, track) = evaluate(&cfg, track)?;
            write_file(&out.join("metrics.csv"), metrics_csv(&metrics))?;
            let bins = bin_by_curvature(&records, &track, &TABLE_BIN_EDGES)?;
            let mut csv = bins.to_csv();
            csv += &format!("# overflow={}\n", bins.overflow);
            write_file(&out.join("curvature_bins.csv"), csv)?;
            write_file(
                &out.join("error_histogram.csv"),
                error_histogram(&records, hist_width)?.to_csv(),
            )?;
        }
        Command::Sweep {
            track,
            experiment,
            out,
            plot,
            ..
        } => {
            let Some(experiment) = Experiment::from_name(&experiment) else {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                bail!(
                    "unknown experiment `{experiment}` (expected one of {})",
                    names.join(", ")
                );
            };
            let ctx = SweepContext {
                track: resolve_track(&cfg, &track)?,
                eval_ds: cfg.eval_ds,
                env: cfg.env.clone(),
                controller: cfg.controller.clone(),
                policy: load_policy(&cfg)?,
                cem: cfg.cem,
                action_space: cfg.action_space,
                reward_mode: cfg.env.reward_mode,
                episodes: cfg.episodes,
                seed: cfg.seed,
                grid: cfg.sweep.clone(),
            };
            let report = sweep(experiment, &ctx)?;
            let csv = report.to_csv();
            write_file(&out.join(report.file_name()), &csv)?;
            if plot {
                let svg = plot::sweep_svg(experiment.name(), &csv)?;
                write_file(&out.join(format!("{}.svg", experiment.name())), svg)?;
            }
        }
        Command::Features { track, out } => {
            let track = resolve_track(&cfg, &track)?;
            let rows = feature_kl(
                &track,
                &cfg.env.camera,
                cfg.features.reference_marker()?,
                &cfg.features.other_markers()?,
                &cfg.features.sizes,
                cfg.features.samples,
                cfg.seed,
            )?;
            write_file(&out.join("kl.csv"), KlRow::to_csv(&rows))?;
        }
    }
    Ok(())
}

fn quoted(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

fn curve_path(policy: &Path) -> PathBuf {
    let stem = policy
        .file_stem()
        .map_or("policy".into(), |s| s.to_string_lossy().into_owned());
    policy.with_file_name(format!("{stem}_curve.csv"))
}

fn resolve_track(cfg: &RunConfig, arg: &TrackArg) -> anyhow::Result<TrackSpec> {
    Ok(match &arg.track {
        Some(dir) => load_track_bundle(dir)
            .with_context(|| format!("loading track bundle {}", dir.display()))?,
        None => TrackSpec::generate(&cfg.track)?,
    })
}

fn load_policy(cfg: &RunConfig) -> anyhow::Result<Option<LinearPolicy>> {
    let Some(path) = &cfg.policy_file else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading policy {}", path.display()))?;
    let policy = LinearPolicy::from_csv(&text)
        .with_context(|| format!("parsing policy {}", path.display()))?;
    if policy.feature_dim != cfg.env.feature_dim {
        bail!(
            "policy_file: policy has {} features but env.feature_dim is {}",
            policy.feature_dim,
            cfg.env.feature_dim
        );
    }
    Ok(Some(policy))
}

fn evaluate(
    cfg: &RunConfig,
    track: TrackSpec,
) -> anyhow::Result<(Vec<lanekeep::EpisodeRecord>, MetricsRow, TrackSpec)> {
    let policy = load_policy(cfg)?;
    if cfg.controller.kind == ControllerKind::Policy && policy.is_none() {
        bail!(lanekeep::Error::Config {
            key: "policy_file".into(),
            message: "controller.kind = \"policy\" needs a policy file".into(),
        });
    }
    let world = World::new(track, cfg.env.clone())?;
    let make = || cfg.controller.build(policy.as_ref());
    let (records, metrics) = run_eval(&world, &make, cfg.episodes, cfg.seed)?;
    Ok((records, metrics, world.track))
}

fn metrics_csv(m: &MetricsRow) -> String {
    format!(
        "{},mean_e_v_signed,episodes\n{},{},{}\n",
        MetricsRow::CSV_HEADER,
        m.csv_cells(),
        g6(m.mean_e_v_signed),
        m.episodes
    )
}
