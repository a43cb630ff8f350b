use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const IMAGE_W: usize = 320;
pub const IMAGE_H: usize = 96;

/// Pinhole camera on the robot origin, pitched down towards flat ground.
/// Pixel `(u, v)` has its centre at integer coordinates; `u` grows to the
/// right and `v` downwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub mount_height: f64,
    pub pitch: f64,
    pub focal: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            mount_height: 0.5,
            pitch: 0.35,
            focal: 250.0,
            u0: 159.5,
            v0: 47.5,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::domain("camera focal length must be positive"));
        }
        if !(self.pitch > 0.0 && self.pitch < std::f64::consts::FRAC_PI_2) {
            return Err(Error::domain("camera pitch must lie in (0, π/2)"));
        }
        if !(self.mount_height > 0.0) {
            return Err(Error::domain("camera mount height must be positive"));
        }
        Ok(())
    }

    /// Projects a body-frame ground point; `None` behind the image plane.
    pub fn project(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (sp, cp) = self.pitch.sin_cos();
        let dz = -self.mount_height;
        let zc = x * cp - dz * sp;
        if zc <= 1e-6 {
            return None;
        }
        let xc = -y;
        let yc = -x * sp - dz * cp;
        Some((
            self.u0 + self.focal * xc / zc,
            self.v0 + self.focal * yc / zc,
        ))
    }
}

/// Image-to-ground homography `X = H·U` for the `z = 0` plane, in the body
/// frame (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundMapping {
    pub h: [[f64; 3]; 3],
    pub camera: CameraModel,
}

pub fn ground_homography(cam: &CameraModel) -> Result<GroundMapping> {
    cam.validate()?;
    let (sp, cp) = cam.pitch.sin_cos();
    let (f, hgt, u0, v0) = (cam.focal, cam.mount_height, cam.u0, cam.v0);
    Ok(GroundMapping {
        h: [
            [0.0, -hgt * sp, hgt * (f * cp + v0 * sp)],
            [-hgt, 0.0, hgt * u0],
            [0.0, cp, f * sp - v0 * cp],
        ],
        camera: *cam,
    })
}

impl GroundMapping {
    pub fn image_to_ground(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let h = &self.h;
        let w = h[2][0] * u + h[2][1] * v + h[2][2];
        if w <= 1e-9 {
            return Err(Error::AboveHorizon { u, v });
        }
        let x = h[0][0] * u + h[0][1] * v + h[0][2];
        let y = h[1][0] * u + h[1][1] * v + h[1][2];
        Ok((x / w, y / w))
    }

    pub fn ground_to_image(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        self.camera.project(x, y)
    }

    /// Body-frame ground point under every pixel centre, row-major; NaN
    /// above the horizon.
    pub fn pixel_lut(&self) -> Vec<[f32; 2]> {
        let mut out = Vec::with_capacity(IMAGE_W * IMAGE_H);
        for v in 0..IMAGE_H {
            for u in 0..IMAGE_W {
                out.push(match self.image_to_ground(u as f64, v as f64) {
                    Ok((x, y)) => [x as f32, y as f32],
                    Err(_) => [f32::NAN, f32::NAN],
                });
            }
        }
        out
    }
}
