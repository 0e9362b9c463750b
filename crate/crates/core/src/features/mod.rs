//! Spectrogram features.
//!
//! The pipeline is: resample to the processing rate, pad or crop to a fixed
//! duration, STFT with a periodic Hann window, dB compression, bilinear
//! resize to the model input shape, and per-example standardization.

mod fft;
mod stft;

pub use fft::{fft, FftPlan};
pub use stft::{stft, Spectrogram, StftParams, WindowKind, MAGNITUDE_FLOOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioClip};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("FFT length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),
    #[error("hop {hop} must be in 1..={fft_size}")]
    InvalidHop { hop: usize, fft_size: usize },
    #[error("clip has {samples} samples, fewer than one {fft_size}-sample frame")]
    ClipTooShort { samples: usize, fft_size: usize },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("feature tensor expects {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
}

/// Every constant that shapes a feature tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub fft_size: usize,
    pub hop: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            duration_s: 3.0,
            fft_size: 512,
            hop: 256,
            height: 64,
            width: 64,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |msg: &str| Err(FeatureError::InvalidConfig(msg.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration_s must be positive");
        }
        if self.height == 0 || self.width == 0 {
            return bad("feature height and width must be positive");
        }
        self.stft_params()?;
        let n = (self.duration_s * self.sample_rate as f64).round() as usize;
        if n < self.fft_size {
            return bad("duration is shorter than one FFT frame");
        }
        Ok(())
    }

    pub fn stft_params(&self) -> Result<StftParams, FeatureError> {
        StftParams::new(self.fft_size, self.hop)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Standardized `[height x width]` model input, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self, FeatureError> {
        if values.len() != height * width {
            return Err(FeatureError::ShapeMismatch {
                expected: height * width,
                actual: values.len(),
            });
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// Periodic Hann window: `w[k] = 0.5 (1 - cos(2πk/n))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    assert!(n >= 1, "window length must be positive");
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Bilinear resize of a `[frames x bins]` spectrogram on a corner-aligned grid.
///
/// Output row `i` samples source row `i * (frames - 1) / (out_h - 1)`, so the
/// four corners map exactly onto the source corners.
pub fn resize_bilinear(spec: &Spectrogram, out_h: usize, out_w: usize) -> Vec<f32> {
    resize_grid(spec.values(), spec.frames(), spec.bins(), out_h, out_w)
}

pub(crate) fn resize_grid(src: &[f32], in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    assert!(in_h > 0 && in_w > 0, "cannot resize an empty grid");
    assert_eq!(src.len(), in_h * in_w);
    if in_h == out_h && in_w == out_w {
        return src.to_vec();
    }
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out <= 1 || n_in <= 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..out_w).map(|j| coord(j, out_w, in_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (r0, r1, fy) = coord(i, out_h, in_h);
        for &(c0, c1, fx) in &cols {
            let at = |r: usize, c: usize| src[r * in_w + c] as f64;
            let top = at(r0, c0) + (at(r0, c1) - at(r0, c0)) * fx;
            let bottom = at(r1, c0) + (at(r1, c1) - at(r1, c0)) * fx;
            out.push((top + (bottom - top) * fy) as f32);
        }
    }
    out
}

/// Zero-mean, unit-variance rescaling. A (near) constant input becomes all zeros.
pub fn standardize(values: &[f32]) -> Vec<f32> {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-8 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| ((v as f64 - mean) / std) as f32).collect()
}

/// Full clip-to-tensor pipeline.
pub fn featurize(clip: &AudioClip, cfg: &PipelineConfig) -> Result<FeatureTensor, FeatureError> {
    cfg.validate()?;
    let clip = audio::resample(clip, cfg.sample_rate);
    let clip = audio::pad_or_trim(&clip, cfg.duration_s);
    let spec = stft(&clip, &cfg.stft_params()?)?;
    let grid = resize_bilinear(&spec, cfg.height, cfg.width);
    FeatureTensor::new(cfg.height, cfg.width, standardize(&grid))
}
