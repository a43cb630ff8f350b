use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::camera::{IMAGE_H, IMAGE_W};
use super::image::BinaryImage;
use crate::{Error, Result};

/// Supported pooled feature sizes.
pub const FEATURE_SIZES: [usize; 8] = [16, 32, 64, 128, 256, 512, 1024, 2048];

/// Pooled occupancy fractions, cells in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVec {
    pub values: Vec<f64>,
}

impl FeatureVec {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `(cols, rows)` of the pooling grid for `d` cells, with the cell aspect
/// closest to the image's.
pub fn grid_shape(d: usize) -> Result<(usize, usize)> {
    if !FEATURE_SIZES.contains(&d) {
        return Err(Error::domain(format!(
            "feature size {d} not in {FEATURE_SIZES:?}"
        )));
    }
    let aspect = IMAGE_W as f64 / IMAGE_H as f64;
    let mut best = None;
    let mut rows = 1;
    while rows <= d {
        let cols = d / rows;
        if cols * rows == d && IMAGE_W.is_multiple_of(cols) && IMAGE_H.is_multiple_of(rows) {
            let score = ((cols as f64 / rows as f64) / aspect).ln().abs();
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, cols, rows));
            }
        }
        rows *= 2;
    }
    best.map(|(_, c, r)| (c, r))
        .ok_or_else(|| Error::domain(format!("feature size {d} does not tile the image")))
}

/// Cell index of every pixel for the grid of `FEATURE_SIZES[k]`.
fn cell_lut(k: usize) -> &'static [u16] {
    static LUTS: [OnceLock<Vec<u16>>; FEATURE_SIZES.len()] =
        [const { OnceLock::new() }; FEATURE_SIZES.len()];
    LUTS[k].get_or_init(|| {
        let (cols, rows) = grid_shape(FEATURE_SIZES[k]).expect("supported size");
        let (cw, ch) = (IMAGE_W / cols, IMAGE_H / rows);
        (0..IMAGE_W * IMAGE_H)
            .map(|i| ((i / IMAGE_W / ch) * cols + (i % IMAGE_W) / cw) as u16)
            .collect()
    })
}

/// Mean pixel value of each grid cell.
pub fn distill(img: &BinaryImage, d: usize) -> Result<FeatureVec> {
    let (cols, rows) = grid_shape(d)?;
    let k = FEATURE_SIZES
        .iter()
        .position(|&s| s == d)
        .expect("validated size");
    let lut = cell_lut(k);
    let data = img.data();
    let mut sums = vec![0.0f64; d];
    for &i in img.support() {
        let i = i as usize;
        sums[lut[i] as usize] += data[i] as f64;
    }
    let area = ((IMAGE_W / cols) * (IMAGE_H / rows)) as f64;
    Ok(FeatureVec {
        values: sums.into_iter().map(|s| s / area).collect(),
    })
}
