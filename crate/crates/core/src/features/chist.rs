use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Colour-histogram layout: `bins_per_channel` half-open uniform bins over
/// `[lo, hi)` for each of `channels` interleaved channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChistParams {
    pub bins_per_channel: usize,
    pub channels: usize,
    pub intensity_range: (f64, f64),
}

impl Default for ChistParams {
    fn default() -> Self {
        Self {
            bins_per_channel: 16,
            channels: 3,
            intensity_range: (0.0, 1.0),
        }
    }
}

impl ChistParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_channel == 0 {
            return Err(Error::Config("CHIST needs at least one bin".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("CHIST needs at least one channel".into()));
        }
        let (lo, hi) = self.intensity_range;
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bad intensity range [{lo}, {hi})")));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.bins_per_channel * self.channels
    }
}

/// Per-channel intensity histograms of a flattened (channel-last) image,
/// normalised by pixel count and concatenated channel-major.
///
/// Intensities outside `[lo, hi)` are clamped into the first or last bin.
pub fn chist_features(pixels: &[f64], params: &ChistParams) -> Result<Vec<f64>> {
    params.validate()?;
    let ch = params.channels;
    if pixels.is_empty() || !pixels.len().is_multiple_of(ch) {
        return Err(Error::Dim {
            expected: ch,
            got: pixels.len(),
        });
    }
    let bins = params.bins_per_channel;
    let (lo, hi) = params.intensity_range;
    let scale = bins as f64 / (hi - lo);
    let n_pixels = pixels.len() / ch;
    let mut hist = vec![0.0; bins * ch];
    for px in pixels.chunks_exact(ch) {
        for (c, &v) in px.iter().enumerate() {
            let pos = ((v - lo) * scale).floor();
            let bin = if pos < 0.0 {
                0
            } else {
                (pos as usize).min(bins - 1)
            };
            hist[c * bins + bin] += 1.0;
        }
    }
    let inv = 1.0 / n_pixels as f64;
    hist.iter_mut().for_each(|h| *h *= inv);
    Ok(hist)
}
