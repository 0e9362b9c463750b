use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use super::{hann_window, FeatureError};
use crate::audio::AudioClip;

/// Magnitude floor added before the dB conversion.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl StftParams {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self, FeatureError> {
        let params = Self {
            fft_size,
            hop,
            window: WindowKind::Hann,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.fft_size == 0 || !self.fft_size.is_power_of_two() {
            return Err(FeatureError::NonPowerOfTwoLength(self.fft_size));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(FeatureError::InvalidHop {
                hop: self.hop,
                fft_size: self.fft_size,
            });
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of full frames that fit in `n_samples`.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.fft_size {
            0
        } else {
            1 + (n_samples - self.fft_size) / self.hop
        }
    }
}

/// Log-magnitude spectrogram in dB, stored `[frames x bins]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f32>,
    frames: usize,
    bins: usize,
    params: StftParams,
}

impl Spectrogram {
    pub fn from_values(values: Vec<f32>, frames: usize, bins: usize, params: StftParams) -> Self {
        assert_eq!(values.len(), frames * bins);
        Self {
            values,
            frames,
            bins,
            params,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn get(&self, frame: usize, bin: usize) -> f32 {
        self.values[frame * self.bins + bin]
    }
}

/// Short-time Fourier transform of a clip: Hann-windowed frames of
/// `fft_size` samples every `hop` samples, reduced to `20 log10(|X| + 1e-6)`
/// over bins `0..=fft_size/2`.
pub fn stft(clip: &AudioClip, params: &StftParams) -> Result<Spectrogram, FeatureError> {
    params.validate()?;
    let samples = clip.samples();
    if samples.len() < params.fft_size {
        return Err(FeatureError::ClipTooShort {
            samples: samples.len(),
            fft_size: params.fft_size,
        });
    }
    let plan = FftPlan::new(params.fft_size)?;
    let window = hann_window(params.fft_size);
    let frames = params.frame_count(samples.len());
    let bins = params.bins();
    let mut values = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); params.fft_size];
    for t in 0..frames {
        let frame = &samples[t * params.hop..t * params.hop + params.fft_size];
        for ((slot, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *slot = Complex64::new(s as f64 * w, 0.0);
        }
        plan.process(&mut buf, false);
        values.extend(
            buf[..bins]
                .iter()
                .map(|v| (20.0 * (v.norm() + MAGNITUDE_FLOOR).log10()) as f32),
        );
    }
    Ok(Spectrogram {
        values,
        frames,
        bins,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_formula() {
        let clip = AudioClip::new(vec![0.0; 48000], 16000).unwrap();
        let spec = stft(&clip, &StftParams::new(512, 256).unwrap()).unwrap();
        assert_eq!((spec.frames(), spec.bins()), (186, 257));
    }

    #[test]
    fn silence_hits_the_floor() {
        let clip = AudioClip::new(vec![0.0; 2048], 16000).unwrap();
        let spec = stft(&clip, &StftParams::new(512, 256).unwrap()).unwrap();
        assert!(spec.values().iter().all(|&v| v == -120.0));
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let samples: Vec<f32> = (0..16000)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0).sin() as f32 * 0.8)
            .collect();
        let clip = AudioClip::new(samples, 16000).unwrap();
        let spec = stft(&clip, &StftParams::new(512, 256).unwrap()).unwrap();
        for t in 0..spec.frames() {
            let row = &spec.values()[t * spec.bins()..(t + 1) * spec.bins()];
            let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(argmax, 32, "frame {t}");
        }
    }

    #[test]
    fn short_clip_and_bad_params() {
        let clip = AudioClip::new(vec![0.0; 100], 16000).unwrap();
        assert_eq!(
            stft(&clip, &StftParams::new(512, 256).unwrap()).unwrap_err(),
            FeatureError::ClipTooShort {
                samples: 100,
                fft_size: 512
            }
        );
        assert!(StftParams::new(500, 250).is_err());
        assert!(StftParams::new(512, 0).is_err());
        assert!(StftParams::new(512, 513).is_err());
    }
}
