//! On-disk formats: numeric formatting, CSV tables, episode logs, track
//! bundles and PGM images.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{RefRow, RefTable};
use crate::sensor::BinaryImage;
use crate::track::{PerturbMode, Point2, TrackParams, TrackShape, TrackSpec};
use crate::tracking::EpisodeRecord;
use crate::{Error, Result};

/// C-style `%.{sig}g`: `sig` significant digits, trailing zeros stripped,
/// scientific notation outside `[1e-4, 10^sig)`.
pub fn fmt_g(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Six significant digits, the default for reports.
pub fn g6(v: f64) -> String {
    fmt_g(v, 6)
}

fn parse_err(what: &'static str, path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        what,
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Parses a headed numeric CSV, skipping `#` comment lines.
pub fn read_numeric_csv(path: &Path, what: &'static str, header: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => {
            return Err(parse_err(
                what,
                path,
                format!("expected header `{header}`, found {other:?}"),
            ));
        }
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(what, path, format!("row {}: {e}", i + 1)))?;
            if row.len() != width {
                return Err(parse_err(
                    what,
                    path,
                    format!("row {} has {} cells", i + 1, row.len()),
                ));
            }
            Ok(row)
        })
        .collect()
}

pub const REFTABLE_HEADER: &str = "S,x,y,theta";

pub fn reftable_csv(table: &RefTable) -> String {
    let mut s = format!("{REFTABLE_HEADER}\n");
    for r in &table.rows {
        let f = |v| fmt_g(v, 9);
        writeln!(s, "{},{},{},{}", f(r.s), f(r.x), f(r.y), f(r.theta)).unwrap();
    }
    s
}

pub fn read_reftable(path: &Path) -> Result<RefTable> {
    let rows: Vec<RefRow> = read_numeric_csv(path, "reference table", REFTABLE_HEADER)?
        .into_iter()
        .map(|r| RefRow {
            s: r[0],
            x: r[1],
            y: r[2],
            theta: r[3],
        })
        .collect();
    if rows.len() < 2 {
        return Err(parse_err(
            "reference table",
            path,
            "needs at least two rows",
        ));
    }
    let spacing_ds = rows[1].s - rows[0].s;
    Ok(RefTable { rows, spacing_ds })
}

pub const EPISODE_HEADER: &str = "t,x,y,theta,v,omega,a_v,a_omega,S,i_star,e_x,e_theta,e_V,reward";

pub fn episode_csv(rec: &EpisodeRecord) -> String {
    let mut s = format!("{EPISODE_HEADER}\n");
    let f = |v| fmt_g(v, 9);
    for r in &rec.steps {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            f(r.x),
            f(r.y),
            f(r.theta),
            f(r.v),
            f(r.omega),
            f(r.a_v),
            f(r.a_omega),
            f(r.s),
            r.i_star,
            f(r.e_x),
            f(r.e_theta),
            f(r.e_v),
            f(r.reward)
        )
        .unwrap();
    }
    writeln!(s, "# done_reason={}", rec.done_reason.as_str()).unwrap();
    s
}

pub fn write_pgm(path: &Path, img: &BinaryImage) -> Result<()> {
    write_file(path, img.to_pgm())
}

/// Flat metadata written next to a generated track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackMeta {
    pub shape: String,
    pub scale: f64,
    pub seed: u64,
    pub n: usize,
    pub j: usize,
    pub w: usize,
    pub r: f64,
    pub ds: f64,
    pub lane_width: f64,
    pub perturb_mode: PerturbMode,
}

impl TrackMeta {
    pub fn from_params(p: &TrackParams) -> TrackMeta {
        let (shape, scale) = match p.shape {
            TrackShape::FigureEight { scale } => ("figure_eight", scale),
            TrackShape::Circle { radius } => ("circle", radius),
        };
        TrackMeta {
            shape: shape.into(),
            scale,
            seed: p.seed,
            n: p.n,
            j: p.j,
            w: p.w,
            r: p.r,
            ds: p.ds,
            lane_width: p.min_separation,
            perturb_mode: p.perturb_mode,
        }
    }

    pub fn to_params(&self) -> Result<TrackParams> {
        let shape = match self.shape.as_str() {
            "figure_eight" => TrackShape::FigureEight { scale: self.scale },
            "circle" => TrackShape::Circle { radius: self.scale },
            other => {
                return Err(Error::config(
                    "shape",
                    format!("unknown track shape `{other}`"),
                ))
            }
        };
        Ok(TrackParams {
            shape,
            min_separation: self.lane_width,
            n: self.n,
            j: self.j,
            w: self.w,
            r: self.r,
            perturb_mode: self.perturb_mode,
            ds: self.ds,
            seed: self.seed,
        })
    }
}

fn points_csv(header: &str, rows: impl Iterator<Item = (usize, Point2)>) -> String {
    let mut s = format!("{header}\n");
    for (k, p) in rows {
        writeln!(s, "{k},{},{}", fmt_g(p.x, 9), fmt_g(p.y, 9)).unwrap();
    }
    s
}

pub fn reftable_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("reftable_{k}.csv"))
}

/// Writes `cones.csv`, `centers.csv`, `reftable_<k>.csv` and `track.toml`.
pub fn save_track_bundle(dir: &Path, track: &TrackSpec) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cones = track
        .cones
        .lane1_cones
        .iter()
        .map(|&p| (1, p))
        .chain(track.cones.lane2_cones.iter().map(|&p| (2, p)));
    write_file(&dir.join("cones.csv"), points_csv("lane,x,y", cones))?;
    write_file(
        &dir.join("centers.csv"),
        points_csv("i,x,y", track.centers.iter().copied().enumerate()),
    )?;
    for (k, t) in track.ref_tables.iter().enumerate() {
        write_file(&reftable_path(dir, k), reftable_csv(t))?;
    }
    let meta = toml::to_string(&TrackMeta::from_params(&track.params))
        .map_err(|e| Error::config("track.toml", e.to_string()))?;
    write_file(&dir.join("track.toml"), meta)
}

/// Regenerates a track from its bundle metadata and checks the stored cones
/// against it.
pub fn load_track_bundle(dir: &Path) -> Result<TrackSpec> {
    let meta_path = dir.join("track.toml");
    let text = fs::read_to_string(&meta_path)?;
    let meta: TrackMeta = toml::from_str(&text)
        .map_err(|e| parse_err("track metadata", &meta_path, e.to_string()))?;
    let track = TrackSpec::generate(&meta.to_params()?)?;
    let cones_path = dir.join("cones.csv");
    let stored = read_numeric_csv(&cones_path, "cones", "lane,x,y")?;
    let expected: Vec<Point2> = track
        .cones
        .lane1_cones
        .iter()
        .chain(&track.cones.lane2_cones)
        .copied()
        .collect();
    let matches = stored.len() == expected.len()
        && stored
            .iter()
            .zip(&expected)
            .all(|(r, p)| (r[1] - p.x).abs() < 1e-6 && (r[2] - p.y).abs() < 1e-6);
    if !matches {
        return Err(parse_err(
            "cones",
            &cones_path,
            "cones do not match the track metadata",
        ));
    }
    Ok(track)
}
