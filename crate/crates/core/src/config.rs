//! Run configuration.
//!
//! A [`RunConfig`] is stored as TOML. Every tunable lives under a dotted key
//! (`track.seed`, `env.weights.v_desired`, `controller.pd.kp`, ...), so a
//! file may set any subset of keys and `--set key=value` overrides address
//! the same namespace. Unknown keys are rejected.
//!
//! ```
//! use lanekeep::config::RunConfig;
//!
//! let mut cfg = RunConfig::default();
//! cfg.apply_override("track.seed=7").unwrap();
//! cfg.apply_override("controller.kind=\"pure_pursuit\"").unwrap();
//! assert_eq!(cfg.track.seed, 7);
//! let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
//! assert_eq!(back, cfg);
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::ControllerConfig;
use crate::error::{Error, Result};
use crate::eval::SweepGrid;
use crate::policy::{ActionSpace, CEMConfig};
use crate::sensor::MarkerKind;
use crate::track::TrackParams;
use crate::tracking::EnvConfig;

/// Settings of the feature-distribution study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureStudyConfig {
    pub reference: String,
    pub others: Vec<String>,
    pub sizes: Vec<usize>,
    pub samples: usize,
}

impl Default for FeatureStudyConfig {
    fn default() -> Self {
        FeatureStudyConfig {
            reference: "cone".into(),
            others: vec!["cylinder".into(), "solid_lane".into()],
            sizes: vec![16, 32, 64, 128, 256, 512, 1024, 2048],
            samples: 500,
        }
    }
}

impl FeatureStudyConfig {
    pub fn reference_marker(&self) -> Result<MarkerKind> {
        marker(&self.reference, "features.reference")
    }

    pub fn other_markers(&self) -> Result<Vec<MarkerKind>> {
        self.others
            .iter()
            .map(|m| marker(m, "features.others"))
            .collect()
    }
}

fn marker(name: &str, key: &str) -> Result<MarkerKind> {
    MarkerKind::from_name(name)
        .ok_or_else(|| Error::config(key, format!("unknown marker `{name}`")))
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base seed for episode seeds and training.
    pub seed: u64,
    /// Episodes per evaluation.
    pub episodes: usize,
    /// Reference resolution of the evaluation track (m).
    pub eval_ds: f64,
    pub action_space: ActionSpace,
    /// Trained policy used when `controller.kind = "policy"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_file: Option<PathBuf>,
    pub track: TrackParams,
    pub env: EnvConfig,
    pub controller: ControllerConfig,
    pub cem: CEMConfig,
    pub sweep: SweepGrid,
    pub features: FeatureStudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            episodes: 100,
            eval_ds: 0.01,
            action_space: ActionSpace::BodyTwist,
            policy_file: None,
            track: TrackParams::default(),
            env: EnvConfig::default(),
            controller: ControllerConfig::default(),
            cem: CEMConfig::default(),
            sweep: SweepGrid::default(),
            features: FeatureStudyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let value: toml::Table = toml::from_str(text).map_err(|e| toml_error("<input>", e))?;
        Self::from_table(value)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let value: toml::Table =
            toml::from_str(&text).map_err(|e| toml_error(&path.display().to_string(), e))?;
        Self::from_table(value)
    }

    /// Loads `path` (or the defaults) and applies `key=value` overrides in order.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| toml_error(&p.display().to_string(), e))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            set_dotted(&mut table, o)?;
            let key = o.split_once('=').map_or(o.as_str(), |(k, _)| k.trim());
            Self::from_table(table.clone()).map_err(|e| match e {
                Error::Config { message, .. } => Error::config(key, message),
                other => other,
            })?;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<RunConfig> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| toml_error("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override; the value is TOML, bare words are
    /// taken as strings.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let mut table =
            toml::Table::try_from(&*self).map_err(|e| Error::config("config", e.to_string()))?;
        set_dotted(&mut table, assignment)?;
        let key = assignment
            .split_once('=')
            .map_or(assignment, |(k, _)| k.trim());
        *self = Self::from_table(table).map_err(|e| match e {
            Error::Config { message, .. } => Error::config(key, message),
            other => other,
        })?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, &self.to_toml_string()?)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |key: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::config(key, other.to_string()),
            })
        };
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if !(self.eval_ds > 0.0) {
            return Err(Error::config("eval_ds", "must be positive"));
        }
        if !(self.track.ds > 0.0) {
            return Err(Error::config("track.ds", "must be positive"));
        }
        if self.track.n < 3 {
            return Err(Error::config("track.n", "need at least 3 cones per lane"));
        }
        if self.track.j == 0 {
            return Err(Error::config("track.j", "need at least one waypoint set"));
        }
        if !(self.track.r >= 0.0) {
            return Err(Error::config("track.r", "must be non-negative"));
        }
        if !(self.env.dt > 0.0) {
            return Err(Error::config("env.dt", "must be positive"));
        }
        if self.env.source_hz == 0 {
            return Err(Error::config("env.source_hz", "must be positive"));
        }
        check("env.ik", self.env.ik.validate())?;
        check("env.slip", self.env.slip.validate())?;
        check("env.camera", self.env.camera.validate())?;
        check(
            "env.feature_dim",
            crate::sensor::grid_shape(self.env.feature_dim).map(|_| ()),
        )?;
        check("controller", self.controller.validate())?;
        check("cem", self.cem.validate())?;
        self.features.reference_marker()?;
        self.features.other_markers()?;
        if self.features.samples < 100 {
            return Err(Error::config("features.samples", "must be at least 100"));
        }
        for m in &self.sweep.markers {
            marker(m, "sweep.markers")?;
        }
        Ok(())
    }
}

fn toml_error(source: &str, e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let key = unknown_field(&message).unwrap_or_else(|| source.to_string());
    Error::config(key, message)
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Writes `value` at the dotted `key` of `table`, creating tables on the way.
fn set_dotted(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(key, "malformed key"));
    }
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(key, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
