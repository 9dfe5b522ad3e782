use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Histogram-of-oriented-gradients layout.
///
/// Orientations are unsigned (`[0, π)`), blocks overlap with a stride of one
/// cell, and each block is L2-normalised as `v / sqrt(‖v‖² + ε²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogParams {
    pub cell_size: usize,
    pub orientation_bins: usize,
    pub block_size: usize,
    /// `(height, width)` in pixels.
    pub image_shape: (usize, usize),
    /// Interleaved channels in flattened input; averaged before gradients.
    pub channels: usize,
    pub norm_epsilon: f64,
}

impl Default for HogParams {
    /// 28×28 grayscale: 7-pixel cells, 9 bins, 2×2-cell blocks.
    fn default() -> Self {
        Self {
            cell_size: 7,
            orientation_bins: 9,
            block_size: 2,
            image_shape: (28, 28),
            channels: 1,
            norm_epsilon: 1e-6,
        }
    }
}

impl HogParams {
    pub fn for_shape(height: usize, width: usize, channels: usize) -> Self {
        Self {
            image_shape: (height, width),
            channels,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.image_shape;
        if self.cell_size == 0 || h % self.cell_size != 0 || w % self.cell_size != 0 {
            return Err(Error::Config(format!(
                "image {h}×{w} is not divisible into {0}×{0} cells",
                self.cell_size
            )));
        }
        if self.orientation_bins < 2 {
            return Err(Error::Config("HOG needs at least two orientation bins".into()));
        }
        let (cy, cx) = self.cells();
        if self.block_size == 0 || self.block_size > cy || self.block_size > cx {
            return Err(Error::Config(format!(
                "block of {} cells does not fit a {cy}×{cx} cell grid",
                self.block_size
            )));
        }
        if self.channels == 0 {
            return Err(Error::Config("HOG needs at least one channel".into()));
        }
        if !(self.norm_epsilon >= 0.0) {
            return Err(Error::Config(
                "HOG normaliser epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn cells(&self) -> (usize, usize) {
        (
            self.image_shape.0 / self.cell_size.max(1),
            self.image_shape.1 / self.cell_size.max(1),
        )
    }

    fn blocks(&self) -> (usize, usize) {
        let (cy, cx) = self.cells();
        (cy + 1 - self.block_size, cx + 1 - self.block_size)
    }

    /// Length of the descriptor.
    pub fn feature_len(&self) -> usize {
        let (by, bx) = self.blocks();
        by * bx * self.block_size * self.block_size * self.orientation_bins
    }
}

/// HOG descriptor of a single-channel image.
pub fn hog_features(image: ArrayView2<'_, f64>, params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (h, w) = params.image_shape;
    if image.dim() != (h, w) {
        return Err(Error::Dim {
            expected: h * w,
            got: image.len(),
        });
    }
    let bins = params.orientation_bins;
    let (cy, cx) = params.cells();
    let mut cell_hist = vec![0.0f64; cy * cx * bins];
    let bin_width = PI / bins as f64;

    let px = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        image[[r, c]]
    };
    for r in 0..h {
        for c in 0..w {
            let (ri, ci) = (r as isize, c as isize);
            let gx = px(ri, ci + 1) - px(ri, ci - 1);
            let gy = px(ri + 1, ci) - px(ri - 1, ci);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += PI;
            }
            if theta >= PI {
                theta -= PI;
            }
            let bin = ((theta / bin_width) as usize).min(bins - 1);
            let cell = (r / params.cell_size) * cx + c / params.cell_size;
            cell_hist[cell * bins + bin] += mag;
        }
    }

    let (by, bx) = params.blocks();
    let b = params.block_size;
    let eps2 = params.norm_epsilon * params.norm_epsilon;
    let mut out = Vec::with_capacity(params.feature_len());
    let mut block = Vec::with_capacity(b * b * bins);
    for y in 0..by {
        for x in 0..bx {
            block.clear();
            for dy in 0..b {
                for dx in 0..b {
                    let cell = (y + dy) * cx + (x + dx);
                    block.extend_from_slice(&cell_hist[cell * bins..(cell + 1) * bins]);
                }
            }
            let norm2: f64 = block.iter().map(|v| v * v).sum();
            let denom = (norm2 + eps2).sqrt();
            if denom == 0.0 {
                out.extend(std::iter::repeat_n(0.0, block.len()));
            } else {
                out.extend(block.iter().map(|v| v / denom));
            }
        }
    }
    Ok(out)
}

/// HOG descriptor of a flattened (row-major, channel-last) image.
pub fn hog_features_flat(pixels: &[f64], params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (h, w) = params.image_shape;
    let ch = params.channels;
    if pixels.len() != h * w * ch {
        return Err(Error::Dim {
            expected: h * w * ch,
            got: pixels.len(),
        });
    }
    let gray = if ch == 1 {
        Array2::from_shape_vec((h, w), pixels.to_vec()).expect("shape checked")
    } else {
        Array2::from_shape_fn((h, w), |(r, c)| {
            let base = (r * w + c) * ch;
            pixels[base..base + ch].iter().sum::<f64>() / ch as f64
        })
    };
    hog_features(gray.view(), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_gives_zero_descriptor() {
        let p = HogParams::default();
        let img = Array2::from_elem((28, 28), 0.7);
        let f = hog_features(img.view(), &p).unwrap();
        assert_eq!(f.len(), 3 * 3 * 4 * 9);
        assert_eq!(f.len(), p.feature_len());
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_edge_lands_in_horizontal_gradient_bin() {
        // 4×8 image, two 4×4 cells, left half 0 and right half 1.
        let p = HogParams {
            cell_size: 4,
            orientation_bins: 9,
            block_size: 1,
            image_shape: (4, 8),
            channels: 1,
            norm_epsilon: 1e-6,
        };
        let img = Array2::from_shape_fn((4, 8), |(_, c)| if c >= 4 { 1.0 } else { 0.0 });
        let f = hog_features(img.view(), &p).unwrap();
        assert_eq!(f.len(), 2 * 9);
        // Columns 3 and 4 each see gx = 1, gy = 0, so each cell holds 4 units
        // of magnitude in bin 0 and nothing else; L2 normalisation gives ≈ 1.
        for cell in 0..2 {
            let hist = &f[cell * 9..(cell + 1) * 9];
            assert!((hist[0] - 4.0 / (16.0f64 + 1e-12).sqrt()).abs() < 1e-12);
            assert!(hist[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn inverted_image_has_same_unsigned_descriptor() {
        let p = HogParams::default();
        let img = Array2::from_shape_fn((28, 28), |(r, c)| ((r * 31 + c * 17) % 11) as f64 / 10.0);
        let inv = img.mapv(|v| 1.0 - v);
        let a = hog_features(img.view(), &p).unwrap();
        let b = hog_features(inv.view(), &p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_checks() {
        let p = HogParams::default();
        assert!(matches!(
            hog_features(Array2::zeros((27, 28)).view(), &p),
            Err(Error::Dim { .. })
        ));
        let bad = HogParams { cell_size: 5, ..p };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = HogParams {
            orientation_bins: 1,
            ..p
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flat_color_input_averages_channels() {
        let p = HogParams::for_shape(28, 28, 3);
        let gray = Array2::from_shape_fn((28, 28), |(r, c)| ((r + 2 * c) % 7) as f64);
        let mut flat = Vec::new();
        for v in gray.iter() {
            flat.extend([*v, *v, *v]);
        }
        let a = hog_features_flat(&flat, &p).unwrap();
        let b = hog_features(gray.view(), &p).unwrap();
        assert_eq!(a, b);
    }
}
