use super::camera::{IMAGE_H, IMAGE_W};
use crate::{Error, Result};

/// 96×320 occupancy image, row-major.
///
/// Values are `{0, 1}` after rendering or thresholding and `[0, 1]` for a
/// blurred image before re-thresholding. `support` lists every index with a
/// non-zero value so sparse scenes can be pooled without a full scan.
#[derive(Debug, Clone)]
pub struct BinaryImage {
    data: Vec<f32>,
    support: Vec<u32>,
}

impl PartialEq for BinaryImage {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl Default for BinaryImage {
    fn default() -> Self {
        Self::zeros()
    }
}

impl BinaryImage {
    pub const WIDTH: usize = IMAGE_W;
    pub const HEIGHT: usize = IMAGE_H;

    pub fn zeros() -> Self {
        BinaryImage {
            data: vec![0.0; IMAGE_W * IMAGE_H],
            support: Vec::new(),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut img = Self::zeros();
        for v in 0..IMAGE_H {
            for u in 0..IMAGE_W {
                let val = f(u, v);
                if val != 0.0 {
                    let i = v * IMAGE_W + u;
                    img.data[i] = val;
                    img.support.push(i as u32);
                }
            }
        }
        img
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * IMAGE_W + u]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Indices of non-zero pixels in insertion order.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn active_count(&self) -> usize {
        self.support.len()
    }

    /// Marks a pixel active; returns whether it was inactive before.
    #[inline]
    pub fn activate(&mut self, index: usize) -> bool {
        if self.data[index] == 0.0 {
            self.data[index] = 1.0;
            self.support.push(index as u32);
            true
        } else {
            false
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.support {
            self.data[i as usize] = 0.0;
        }
        self.support.clear();
    }

    fn rebuild_support(&mut self) {
        self.support.clear();
        for (i, &v) in self.data.iter().enumerate() {
            if v != 0.0 {
                self.support.push(i as u32);
            }
        }
    }

    /// Separable Gaussian blur with zero padding; the result is not
    /// re-thresholded.
    pub fn blurred(&self, sigma: f64) -> BinaryImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

        let (w, h) = (IMAGE_W as isize, IMAGE_H as isize);
        let mut tmp = vec![0.0f64; IMAGE_W * IMAGE_H];
        for v in 0..h {
            for u in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let uu = u + k as isize - radius;
                    if (0..w).contains(&uu) {
                        acc += kv * self.data[(v * w + uu) as usize] as f64;
                    }
                }
                tmp[(v * w + u) as usize] = acc;
            }
        }
        let mut out = BinaryImage::zeros();
        for v in 0..h {
            for u in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let vv = v + k as isize - radius;
                    if (0..h).contains(&vv) {
                        acc += kv * tmp[(vv * w + u) as usize];
                    }
                }
                // drop round-off dust so the support stays meaningful
                out.data[(v * w + u) as usize] = if acc < 1e-9 { 0.0 } else { acc.min(1.0) as f32 };
            }
        }
        out.rebuild_support();
        out
    }

    pub fn thresholded(&self, level: f32) -> BinaryImage {
        let mut out = BinaryImage::zeros();
        for &i in &self.support {
            if self.data[i as usize] >= level {
                out.data[i as usize] = 1.0;
            }
        }
        out.rebuild_support();
        out
    }

    /// Value-weighted mean `(u, v)` of the active pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut su, mut sv, mut m) = (0.0, 0.0, 0.0);
        for &i in &self.support {
            let i = i as usize;
            let val = self.data[i] as f64;
            su += val * (i % IMAGE_W) as f64;
            sv += val * (i / IMAGE_W) as f64;
            m += val;
        }
        (m > 0.0).then(|| (su / m, sv / m))
    }

    /// Binary PGM (P5), 0/255 after thresholding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{IMAGE_W} {IMAGE_H}\n255\n").into_bytes();
        out.extend(
            self.data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }
}

/// Signed horizontal centroid offset, positive when the centroid lies left
/// of the image centre, normalised by the half width. `None` for an empty
/// image.
pub fn centroid_offset(img: &BinaryImage) -> Option<f64> {
    let half = (IMAGE_W as f64 - 1.0) / 2.0;
    img.centroid().map(|(u, _)| (half - u) / half)
}

/// `|centroid − centre| / half-width`; an empty image scores the worst case 1.
pub fn centroid_error(img: &BinaryImage) -> f64 {
    centroid_offset(img).map_or(1.0, |e| e.abs().min(1.0))
}

/// Decides on which control steps a fresh camera frame arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHold {
    ratio: usize,
}

impl FrameHold {
    pub fn new(source_hz: u32, control_hz: u32) -> Result<Self> {
        if source_hz == 0 || control_hz < source_hz || !control_hz.is_multiple_of(source_hz) {
            return Err(Error::domain(format!(
                "control rate {control_hz} Hz must be a multiple of the image rate {source_hz} Hz"
            )));
        }
        Ok(FrameHold {
            ratio: (control_hz / source_hz) as usize,
        })
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn is_fresh(&self, step_index: usize) -> bool {
        step_index.is_multiple_of(self.ratio)
    }
}

/// Returns `latest` on steps where a new frame arrives, `held` otherwise.
pub fn frame_hold<'a>(
    step_index: usize,
    source_hz: u32,
    control_hz: u32,
    latest: &'a BinaryImage,
    held: &'a BinaryImage,
) -> Result<&'a BinaryImage> {
    let hold = FrameHold::new(source_hz, control_hz)?;
    Ok(if hold.is_fresh(step_index) {
        latest
    } else {
        held
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_error_cases() {
        let mid = BinaryImage::from_fn(|u, _| if u == 159 || u == 160 { 1.0 } else { 0.0 });
        assert!(centroid_error(&mid).abs() < 1e-12);
        let left = BinaryImage::from_fn(|u, _| if u == 0 { 1.0 } else { 0.0 });
        assert!((centroid_error(&left) - 1.0).abs() < 1e-12);
        assert!(centroid_offset(&left).unwrap() > 0.0);
        // columns 239 and 240 weighted 3:1 → mean column 239.25
        let off = BinaryImage::from_fn(|u, v| match (u, v) {
            (239, 0..=2) | (240, 0) => 1.0,
            _ => 0.0,
        });
        assert!((centroid_error(&off) - 0.5).abs() < 1e-12);
        assert_eq!(centroid_error(&BinaryImage::zeros()), 1.0);
    }

    #[test]
    fn frame_hold_ratios() {
        let a = BinaryImage::zeros();
        let b = BinaryImage::from_fn(|_, _| 1.0);
        for t in 0..10 {
            assert!(std::ptr::eq(frame_hold(t, 20, 20, &a, &b).unwrap(), &a));
        }
        let fresh: Vec<usize> = (0..20)
            .filter(|&t| std::ptr::eq(frame_hold(t, 4, 20, &a, &b).unwrap(), &a))
            .collect();
        assert_eq!(fresh, vec![0, 5, 10, 15]);
        let fresh1 = (0..60)
            .filter(|&t| FrameHold::new(1, 20).unwrap().is_fresh(t))
            .count();
        assert_eq!(fresh1, 3);
        assert!(frame_hold(0, 3, 20, &a, &b).is_err());
        assert!(frame_hold(0, 40, 20, &a, &b).is_err());
    }

    #[test]
    fn fresh_frames_count_is_ceiling() {
        for (k, hz) in [(1, 20), (5, 4), (10, 2), (20, 1)] {
            let hold = FrameHold::new(hz, 20).unwrap();
            for steps in [1usize, 7, 100, 1000] {
                let fresh = (0..steps).filter(|&t| hold.is_fresh(t)).count();
                assert_eq!(fresh, steps.div_ceil(k));
            }
        }
    }

    #[test]
    fn blur_preserves_mass_away_from_border() {
        let img = BinaryImage::from_fn(|u, v| {
            if (150..170).contains(&u) && (40..50).contains(&v) {
                1.0
            } else {
                0.0
            }
        });
        let b = img.blurred(2.0);
        let mass: f64 = b.data().iter().map(|&x| x as f64).sum();
        assert!((mass - 200.0).abs() < 1e-3);
        let (u0, v0) = img.centroid().unwrap();
        let (u1, v1) = b.centroid().unwrap();
        assert!((u0 - u1).abs() < 1e-4 && (v0 - v1).abs() < 1e-4);
    }

    #[test]
    fn clear_resets_everything() {
        let mut img = BinaryImage::zeros();
        assert!(img.activate(5));
        assert!(!img.activate(5));
        img.clear();
        assert_eq!(img, BinaryImage::zeros());
        assert_eq!(img.active_count(), 0);
    }

    #[test]
    fn pgm_header() {
        let pgm = BinaryImage::zeros().to_pgm();
        assert!(pgm.starts_with(b"P5\n320 96\n255\n"));
        assert_eq!(pgm.len(), 14 + 320 * 96);
    }
}
