use serde::{Deserialize, Serialize};

use super::camera::{ground_homography, CameraModel, IMAGE_H, IMAGE_W};
use super::image::BinaryImage;
use crate::geometry::Pose2D;
use crate::track::{Point2, TrackSpec};
use crate::Result;

/// Strip polyline resolution per lane discretisation interval.
const STRIP_SUBDIV: usize = 4;
/// Ground-range window outside of which markers are culled, metres.
const CULL_NEAR: f64 = 0.2;
const CULL_FAR: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkerKind {
    /// Disc footprint.
    Cone { radius: f64 },
    /// Square footprint, world-axis aligned.
    Cylinder { side: f64 },
    /// Continuous strip along the lane curve.
    SolidLane { width: f64 },
}

impl MarkerKind {
    pub const CONE: MarkerKind = MarkerKind::Cone { radius: 0.1 };
    pub const CYLINDER: MarkerKind = MarkerKind::Cylinder { side: 0.2 };
    pub const SOLID_LANE: MarkerKind = MarkerKind::SolidLane { width: 0.15 };

    pub fn name(&self) -> &'static str {
        match self {
            MarkerKind::Cone { .. } => "cone",
            MarkerKind::Cylinder { .. } => "cylinder",
            MarkerKind::SolidLane { .. } => "solid_lane",
        }
    }

    /// Default-sized marker by name.
    pub fn from_name(name: &str) -> Option<MarkerKind> {
        match name {
            "cone" => Some(Self::CONE),
            "cylinder" => Some(Self::CYLINDER),
            "solid_lane" => Some(Self::SOLID_LANE),
            _ => None,
        }
    }
}

impl Default for MarkerKind {
    fn default() -> Self {
        Self::CONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneSel {
    Left,
    Right,
    Both,
}

/// Markers whose lane station falls in `[start, end]` are not drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingSpan {
    pub lane: LaneSel,
    pub start: f64,
    pub end: f64,
}

impl MissingSpan {
    fn hides(&self, lane: usize, station: f64) -> bool {
        let lane_hit = match self.lane {
            LaneSel::Left => lane == 0,
            LaneSel::Right => lane == 1,
            LaneSel::Both => true,
        };
        lane_hit && station >= self.start && station <= self.end
    }
}

/// One lane boundary: cone positions and a polyline for strip markers, each
/// with arc-length stations along the lane.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGeometry {
    pub cones: Vec<Point2>,
    pub cone_stations: Vec<f64>,
    pub polyline: Vec<Point2>,
    pub poly_stations: Vec<f64>,
}

fn stations(points: &[Point2]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += p.distance(&points[i - 1]);
        }
        out.push(acc);
    }
    out
}

impl LaneGeometry {
    /// Cone stations come from the unperturbed positions `nominal`.
    pub fn new(nominal: &[Point2], cones: Vec<Point2>, polyline: Vec<Point2>) -> Self {
        LaneGeometry {
            cone_stations: stations(nominal),
            cones,
            poly_stations: stations(&polyline),
            polyline,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Footprint {
    Disc { c: Point2, r: f64 },
    Square { c: Point2, half: f64 },
    Capsule { a: Point2, b: Point2, half: f64 },
}

impl Footprint {
    fn center_and_reach(&self) -> (Point2, f64) {
        match *self {
            Footprint::Disc { c, r } => (c, r),
            Footprint::Square { c, half } => (c, half * std::f64::consts::SQRT_2),
            Footprint::Capsule { a, b, half } => (
                Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)),
                0.5 * a.distance(&b) + half,
            ),
        }
    }
}

/// World-frame marker footprints for one track and marker kind.
#[derive(Debug, Clone)]
pub struct Scene {
    markers: Vec<Footprint>,
}

impl Scene {
    pub fn new(lanes: &[LaneGeometry], kind: MarkerKind, missing: &[MissingSpan]) -> Scene {
        let hidden = |lane: usize, s: f64| missing.iter().any(|m| m.hides(lane, s));
        let mut markers = Vec::new();
        for (k, lane) in lanes.iter().enumerate() {
            match kind {
                MarkerKind::Cone { radius } => {
                    for (c, &s) in lane.cones.iter().zip(&lane.cone_stations) {
                        if !hidden(k, s) {
                            markers.push(Footprint::Disc { c: *c, r: radius });
                        }
                    }
                }
                MarkerKind::Cylinder { side } => {
                    for (c, &s) in lane.cones.iter().zip(&lane.cone_stations) {
                        if !hidden(k, s) {
                            markers.push(Footprint::Square {
                                c: *c,
                                half: 0.5 * side,
                            });
                        }
                    }
                }
                MarkerKind::SolidLane { width } => {
                    for i in 1..lane.polyline.len() {
                        let mid = 0.5 * (lane.poly_stations[i - 1] + lane.poly_stations[i]);
                        let (a, b) = (lane.polyline[i - 1], lane.polyline[i]);
                        if !hidden(k, mid) && a.distance(&b) > 0.0 {
                            markers.push(Footprint::Capsule {
                                a,
                                b,
                                half: 0.5 * width,
                            });
                        }
                    }
                }
            }
        }
        Scene { markers }
    }

    /// Scene of a generated track: perturbed cones, strips along the
    /// nominal lane curves.
    pub fn from_track(track: &TrackSpec, kind: MarkerKind, missing: &[MissingSpan]) -> Scene {
        let n = track.params.n.max(2);
        let fine = (n - 1) * STRIP_SUBDIV + 1;
        let curve = |f: &dyn Fn(f64) -> Point2| -> Vec<Point2> {
            (0..fine).map(|i| f(i as f64 / (fine - 1) as f64)).collect()
        };
        let lanes = [
            LaneGeometry::new(
                &track.cones.nominal1,
                track.cones.lane1_cones.clone(),
                curve(&|t| track.lane_curves.c1(t)),
            ),
            LaneGeometry::new(
                &track.cones.nominal2,
                track.cones.lane2_cones.clone(),
                curve(&|t| track.lane_curves.c2(t)),
            ),
        ];
        Scene::new(&lanes, kind, missing)
    }

    pub fn marker_count(&self) -> usize {
        self.markers.len()
    }
}

/// Renders scenes for one camera, caching the per-pixel ground lookup.
#[derive(Debug, Clone)]
pub struct Renderer {
    camera: CameraModel,
    lut: Vec<[f32; 2]>,
    /// Per image row: ground range `x` and lateral scale `a` with
    /// `y = a·(u0 − u)`; `None` above the horizon.
    rows: Vec<Option<(f64, f64)>>,
}

impl Renderer {
    pub fn new(camera: &CameraModel) -> Result<Renderer> {
        let g = ground_homography(camera)?;
        let lut = g.pixel_lut();
        let rows = (0..IMAGE_H)
            .map(|v| {
                let v = v as f64;
                let w = g.h[2][1] * v + g.h[2][2];
                (w > 1e-9).then(|| ((g.h[0][1] * v + g.h[0][2]) / w, camera.mount_height / w))
            })
            .collect();
        Ok(Renderer {
            camera: *camera,
            lut,
            rows,
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    /// Rasterises every marker footprint visible from `pose` into `out`.
    /// A pixel is active when its centre's ground point lies in a footprint.
    pub fn render_into(&self, scene: &Scene, pose: &Pose2D, out: &mut BinaryImage) {
        out.clear();
        let (sin_t, cos_t) = pose.theta.sin_cos();
        let (px, py) = (pose.x, pose.y);
        let to_body = |p: Point2| {
            let (dx, dy) = (p.x - px, p.y - py);
            (cos_t * dx + sin_t * dy, -sin_t * dx + cos_t * dy)
        };
        for fp in &scene.markers {
            let (c, reach) = fp.center_and_reach();
            let (bx, by) = to_body(c);
            if bx + reach < CULL_NEAR || bx - reach > CULL_FAR || by.abs() - reach > bx + 2.0 {
                continue;
            }
            let Some((u_lo, u_hi, v_lo, v_hi)) = self.pixel_box(bx, by, reach) else {
                continue;
            };
            let body = to_body;
            let to_body = |p: Point2| {
                let (x, y) = to_body(p);
                [x as f32, y as f32]
            };
            match *fp {
                Footprint::Disc { c, r } => {
                    let (cx, cy) = body(c);
                    self.fill_spans(out, v_lo, v_hi, |x| {
                        let rem = r * r - (x - cx) * (x - cx);
                        (rem >= 0.0).then(|| {
                            let h = rem.sqrt();
                            (cy - h, cy + h)
                        })
                    });
                }
                Footprint::Square { c, half } => {
                    let (cx, cy) = body(c);
                    // World-axis square: |k·dx − s·dy| ≤ h and |s·dx + k·dy| ≤ h.
                    let (s, k) = (sin_t, cos_t);
                    self.fill_spans(out, v_lo, v_hi, |x| {
                        let dx = x - cx;
                        let mut lo = f64::NEG_INFINITY;
                        let mut hi = f64::INFINITY;
                        for (coef, off) in [(-s, k * dx), (k, s * dx)] {
                            if coef.abs() < 1e-12 {
                                if off.abs() > half {
                                    return None;
                                }
                            } else {
                                let (a, b) = ((-half - off) / coef, (half - off) / coef);
                                lo = lo.max(a.min(b));
                                hi = hi.min(a.max(b));
                            }
                        }
                        (lo <= hi).then_some((cy + lo, cy + hi))
                    });
                }
                Footprint::Capsule { a, b, half } => {
                    let [ax, ay] = to_body(a);
                    let [qx, qy] = to_body(b);
                    let (ex, ey) = (qx - ax, qy - ay);
                    let len2 = ex * ex + ey * ey;
                    let h2 = (half * half) as f32;
                    self.fill(out, u_lo, u_hi, v_lo, v_hi, |x, y| {
                        let (px, py) = (x - ax, y - ay);
                        let t = ((px * ex + py * ey) / len2).clamp(0.0, 1.0);
                        let (dx, dy) = (px - t * ex, py - t * ey);
                        dx * dx + dy * dy <= h2
                    });
                }
            }
        }
    }

    /// Activates, row by row, the pixels whose ground point has lateral
    /// coordinate inside `span(x)` for the row's range `x`.
    #[inline]
    fn fill_spans(
        &self,
        out: &mut BinaryImage,
        v_lo: usize,
        v_hi: usize,
        span: impl Fn(f64) -> Option<(f64, f64)>,
    ) {
        let u0 = self.camera.u0;
        for v in v_lo..=v_hi {
            let Some((x, a)) = self.rows[v] else { continue };
            let Some((y_lo, y_hi)) = span(x) else {
                continue;
            };
            // y = a·(u0 − u) decreases with u.
            let first = (u0 - y_hi / a).ceil().max(0.0);
            let last = (u0 - y_lo / a).floor().min((IMAGE_W - 1) as f64);
            if first > last {
                continue;
            }
            let row = v * IMAGE_W;
            for u in first as usize..=last as usize {
                out.activate(row + u);
            }
        }
    }

    #[inline]
    fn fill(
        &self,
        out: &mut BinaryImage,
        u_lo: usize,
        u_hi: usize,
        v_lo: usize,
        v_hi: usize,
        inside: impl Fn(f32, f32) -> bool,
    ) {
        for v in v_lo..=v_hi {
            let row = v * IMAGE_W;
            for u in u_lo..=u_hi {
                let [x, y] = self.lut[row + u];
                if inside(x, y) {
                    out.activate(row + u);
                }
            }
        }
    }

    /// Conservative pixel bounds of a body-frame disc of radius `reach`.
    fn pixel_box(&self, bx: f64, by: f64, reach: f64) -> Option<(usize, usize, usize, usize)> {
        let mut u_lo = f64::INFINITY;
        let mut u_hi = f64::NEG_INFINITY;
        let mut v_lo = f64::INFINITY;
        let mut v_hi = f64::NEG_INFINITY;
        for (dx, dy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            match self.camera.project(bx + dx * reach, by + dy * reach) {
                Some((u, v)) => {
                    u_lo = u_lo.min(u);
                    u_hi = u_hi.max(u);
                    v_lo = v_lo.min(v);
                    v_hi = v_hi.max(v);
                }
                None => {
                    // corner behind the camera: extend to the bottom edge and full width
                    u_lo = f64::NEG_INFINITY;
                    u_hi = f64::INFINITY;
                    v_hi = f64::INFINITY;
                }
            }
        }
        let u_lo = (u_lo.floor().max(0.0)) as usize;
        let v_lo = (v_lo.floor().max(0.0)) as usize;
        let u_hi = u_hi.ceil().min((IMAGE_W - 1) as f64);
        let v_hi = v_hi.ceil().min((IMAGE_H - 1) as f64);
        if u_hi < 0.0 || v_hi < 0.0 || u_lo >= IMAGE_W || v_lo >= IMAGE_H {
            return None;
        }
        let (u_hi, v_hi) = (u_hi as usize, v_hi as usize);
        (u_lo <= u_hi && v_lo <= v_hi).then_some((u_lo, u_hi, v_lo, v_hi))
    }

    /// Renders, then optionally blurs and re-thresholds at 0.5.
    pub fn render(&self, scene: &Scene, pose: &Pose2D, blur_sigma: f64) -> BinaryImage {
        let mut img = BinaryImage::zeros();
        self.render_into(scene, pose, &mut img);
        if blur_sigma > 0.0 {
            img.blurred(blur_sigma).thresholded(0.5)
        } else {
            img
        }
    }
}

/// One-shot rendering of a track from `robot`.
pub fn render_view(
    robot: &Pose2D,
    track: &TrackSpec,
    cam: &CameraModel,
    kind: MarkerKind,
    blur_sigma: f64,
    missing_spans: &[MissingSpan],
) -> Result<BinaryImage> {
    if !robot.is_finite() {
        return Err(crate::Error::domain("robot pose must be finite"));
    }
    if !(blur_sigma >= 0.0) {
        return Err(crate::Error::domain("blur sigma must be >= 0"));
    }
    let renderer = Renderer::new(cam)?;
    let scene = Scene::from_track(track, kind, missing_spans);
    Ok(renderer.render(&scene, robot, blur_sigma))
}
