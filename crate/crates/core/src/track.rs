//! Lane synthesis, cone layouts, the geometric centerline and the shifted /
//! reversed waypoint sets with their reference tables.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{concat_path, fit_clothoid, sample_reftable, ArcPath, Pose2D, RefTable};
use crate::{Error, Result};

/// Vertical-to-horizontal aspect of the Gerono base curve.
const GERONO_ASPECT: f64 = 0.3;
/// Samples used for curvature and self-intersection checks.
const CHECK_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, o: &Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Closed base curve the two lanes are offset from, `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseCurve {
    /// Lemniscate of Gerono `(a cos τ, a·k sin τ cos τ)`, `τ = 2πt`.
    Gerono {
        a: f64,
    },
    Circle {
        radius: f64,
    },
}

impl BaseCurve {
    /// Position, first and second derivative with respect to `τ = 2πt`.
    fn jet(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let tau = TAU * t;
        let (s, c) = tau.sin_cos();
        match *self {
            BaseCurve::Gerono { a } => {
                let b = a * GERONO_ASPECT;
                let (s2, c2) = (2.0 * tau).sin_cos();
                (
                    [a * c, 0.5 * b * s2],
                    [-a * s, b * c2],
                    [-a * c, -2.0 * b * s2],
                )
            }
            BaseCurve::Circle { radius } => (
                [radius * c, radius * s],
                [-radius * s, radius * c],
                [-radius * c, -radius * s],
            ),
        }
    }

    pub fn point(&self, t: f64) -> Point2 {
        let ([x, y], _, _) = self.jet(t);
        Point2::new(x, y)
    }

    /// Unit left normal.
    pub fn normal(&self, t: f64) -> [f64; 2] {
        let (_, [dx, dy], _) = self.jet(t);
        let n = dx.hypot(dy);
        [-dy / n, dx / n]
    }

    /// Unsigned curvature.
    pub fn curvature(&self, t: f64) -> f64 {
        let (_, [dx, dy], [ddx, ddy]) = self.jet(t);
        (dx * ddy - dy * ddx).abs() / dx.hypot(dy).powi(3)
    }
}

/// Left and right lane boundaries at `±min_separation / 2` along the base
/// curve's normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneCurves {
    pub base: BaseCurve,
    pub min_separation: f64,
}

impl LaneCurves {
    fn offset(&self, t: f64, sign: f64) -> Point2 {
        let p = self.base.point(t);
        let [nx, ny] = self.base.normal(t);
        let h = 0.5 * self.min_separation * sign;
        Point2::new(p.x + h * nx, p.y + h * ny)
    }

    pub fn c1(&self, t: f64) -> Point2 {
        self.offset(t, 1.0)
    }

    pub fn c2(&self, t: f64) -> Point2 {
        self.offset(t, -1.0)
    }

    pub fn max_curvature(&self) -> f64 {
        (0..=CHECK_SAMPLES)
            .map(|i| self.base.curvature(i as f64 / CHECK_SAMPLES as f64))
            .fold(0.0, f64::max)
    }

    fn check_offsets(&self) -> Result<()> {
        let kmax = self.max_curvature();
        if 0.5 * self.min_separation * kmax >= 1.0 {
            return Err(Error::Geometry(format!(
                "lane offset {:.3} m exceeds the minimum radius of curvature {:.3} m; \
                 the offset curves would fold over",
                0.5 * self.min_separation,
                1.0 / kmax
            )));
        }
        Ok(())
    }
}

pub fn make_figure_eight(scale: f64, min_separation: f64) -> Result<LaneCurves> {
    if !(scale > 0.0) || !(min_separation > 0.0) {
        return Err(Error::domain("scale and lane separation must be positive"));
    }
    let lanes = LaneCurves {
        base: BaseCurve::Gerono { a: scale },
        min_separation,
    };
    lanes.check_offsets()?;
    Ok(lanes)
}

pub fn make_circle(radius: f64, min_separation: f64) -> Result<LaneCurves> {
    if !(radius > 0.0) || !(min_separation > 0.0) {
        return Err(Error::domain("radius and lane separation must be positive"));
    }
    let lanes = LaneCurves {
        base: BaseCurve::Circle { radius },
        min_separation,
    };
    lanes.check_offsets()?;
    Ok(lanes)
}

/// `n` points per lane at parameters `(i-1)/(n-1)`.
pub fn discretize_lanes(curves: &LaneCurves, n: usize) -> Result<(Vec<Point2>, Vec<Point2>)> {
    if n < 3 {
        return Err(Error::domain(format!(
            "need at least 3 points per lane, got {n}"
        )));
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    Ok((
        (0..n).map(|i| curves.c1(t(i))).collect(),
        (0..n).map(|i| curves.c2(t(i))).collect(),
    ))
}

/// Elementwise midpoints of the two lanes.
pub fn geometric_center(points1: &[Point2], points2: &[Point2]) -> Result<Vec<Point2>> {
    if points1.len() != points2.len() {
        return Err(Error::domain(format!(
            "lane point counts differ: {} vs {}",
            points1.len(),
            points2.len()
        )));
    }
    Ok(points1
        .iter()
        .zip(points2)
        .map(|(a, b)| Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// Every cone lands on the circle of radius `r`.
    #[default]
    Exact,
    /// Radius drawn uniformly from `[0, r]`.
    UniformDisc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeLayout {
    pub lane1_cones: Vec<Point2>,
    pub lane2_cones: Vec<Point2>,
    pub nominal1: Vec<Point2>,
    pub nominal2: Vec<Point2>,
    pub seed: u64,
}

pub fn randomize_cones(
    nominal1: &[Point2],
    nominal2: &[Point2],
    r: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<ConeLayout> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!(
            "perturbation radius {r} must be >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturb = |pts: &[Point2]| -> Vec<Point2> {
        pts.iter()
            .map(|p| {
                let beta: f64 = rng.random_range(0.0..TAU);
                let rho = match mode {
                    PerturbMode::Exact => r,
                    PerturbMode::UniformDisc => r * rng.random::<f64>(),
                };
                Point2::new(p.x + rho * beta.cos(), p.y + rho * beta.sin())
            })
            .collect()
    };
    let lane1_cones = perturb(nominal1);
    let lane2_cones = perturb(nominal2);
    Ok(ConeLayout {
        lane1_cones,
        lane2_cones,
        nominal1: nominal1.to_vec(),
        nominal2: nominal2.to_vec(),
        seed,
    })
}

/// `j` waypoint lists: `j/2` circular shifts of the centerline by multiples
/// of `w`, followed by their reversals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSets {
    pub sets: Vec<Vec<Point2>>,
    pub shift_w: usize,
    pub n: usize,
}

pub fn make_waypoint_sets(centers: &[Point2], j: usize, w: usize) -> Result<WaypointSets> {
    let n = centers.len();
    if j == 0 || !j.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "set count j={j} must be even and positive"
        )));
    }
    let half = j / 2;
    if w * (half - 1) >= n {
        return Err(Error::domain(format!(
            "largest shift {} must be below the waypoint count {n}",
            w * (half - 1)
        )));
    }
    let mut sets: Vec<Vec<Point2>> = (0..half)
        .map(|k| {
            let mut s = centers.to_vec();
            s.rotate_left(k * w);
            s
        })
        .collect();
    for k in 0..half {
        let mut r = sets[k].clone();
        r.reverse();
        sets.push(r);
    }
    Ok(WaypointSets {
        sets,
        shift_w: w,
        n,
    })
}

/// Drops cyclically adjacent duplicates (the closed lanes repeat their first
/// point at `t = 1`).
fn dedupe_cyclic(points: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|q| q.distance(p) >= 1e-9) {
            out.push(*p);
        }
    }
    while out.len() > 1 && out[0].distance(out.last().unwrap()) < 1e-9 {
        out.pop();
    }
    out
}

/// Closed clothoid loop through `points`, tangents from neighbouring chords.
pub fn closed_clothoid_path(points: &[Point2]) -> Result<ArcPath> {
    let pts = dedupe_cyclic(points);
    let m = pts.len();
    if m < 3 {
        return Err(Error::domain(
            "a closed path needs at least 3 distinct waypoints",
        ));
    }
    let poses: Vec<Pose2D> = (0..m)
        .map(|i| {
            let prev = pts[(i + m - 1) % m];
            let next = pts[(i + 1) % m];
            Pose2D::new(pts[i].x, pts[i].y, (next.y - prev.y).atan2(next.x - prev.x))
        })
        .collect();
    let segments = (0..m)
        .map(|i| {
            fit_clothoid(poses[i], poses[(i + 1) % m]).map_err(|e| Error::SetFit {
                set: 0,
                segment: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    concat_path(segments, true)
}

/// Fits, concatenates and samples one closed path per waypoint set.
pub fn build_paths(sets: &WaypointSets) -> Result<Vec<ArcPath>> {
    sets.sets
        .par_iter()
        .enumerate()
        .map(|(k, pts)| {
            closed_clothoid_path(pts).map_err(|e| match e {
                Error::SetFit {
                    segment, source, ..
                } => Error::SetFit {
                    set: k,
                    segment,
                    source,
                },
                other => other,
            })
        })
        .collect()
}

pub fn build_ref_tables(sets: &WaypointSets, ds: f64) -> Result<Vec<RefTable>> {
    if !(ds > 0.0) {
        return Err(Error::domain(format!(
            "sample spacing {ds} must be positive"
        )));
    }
    let paths = build_paths(sets)?;
    sample_tables(&paths, ds)
}

fn sample_tables(paths: &[ArcPath], ds: f64) -> Result<Vec<RefTable>> {
    paths.par_iter().map(|p| sample_reftable(p, ds)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackShape {
    FigureEight { scale: f64 },
    Circle { radius: f64 },
}

/// Everything needed to regenerate a track deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackParams {
    pub shape: TrackShape,
    pub min_separation: f64,
    pub n: usize,
    pub j: usize,
    pub w: usize,
    pub r: f64,
    pub perturb_mode: PerturbMode,
    pub ds: f64,
    pub seed: u64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            shape: TrackShape::FigureEight { scale: 10.0 },
            min_separation: 1.3,
            n: 200,
            j: 10,
            w: 40,
            r: 0.15,
            perturb_mode: PerturbMode::Exact,
            ds: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub params: TrackParams,
    pub lane_curves: LaneCurves,
    pub cones: ConeLayout,
    pub centers: Vec<Point2>,
    pub waypoint_sets: WaypointSets,
    pub paths: Vec<ArcPath>,
    pub ref_tables: Vec<RefTable>,
    pub lane_width: f64,
}

impl TrackSpec {
    pub fn generate(params: &TrackParams) -> Result<TrackSpec> {
        let lane_curves = match params.shape {
            TrackShape::FigureEight { scale } => make_figure_eight(scale, params.min_separation)?,
            TrackShape::Circle { radius } => make_circle(radius, params.min_separation)?,
        };
        let (p1, p2) = discretize_lanes(&lane_curves, params.n)?;
        let centers = geometric_center(&p1, &p2)?;
        let cones = randomize_cones(&p1, &p2, params.r, params.perturb_mode, params.seed)?;
        let waypoint_sets = make_waypoint_sets(&centers, params.j, params.w)?;
        let paths = build_paths(&waypoint_sets)?;
        let ref_tables = sample_tables(&paths, params.ds)?;
        Ok(TrackSpec {
            params: *params,
            lane_width: params.min_separation,
            lane_curves,
            cones,
            centers,
            waypoint_sets,
            paths,
            ref_tables,
        })
    }

    /// Same track with reference tables resampled at `ds`.
    pub fn with_ds(&self, ds: f64) -> Result<TrackSpec> {
        let mut out = self.clone();
        out.ref_tables = sample_tables(&self.paths, ds)?;
        out.params.ds = ds;
        Ok(out)
    }

    pub fn set_count(&self) -> usize {
        self.ref_tables.len()
    }
}
