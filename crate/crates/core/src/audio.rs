//! WAV decoding and sample-buffer conditioning.
//!
//! Only the RIFF/WAVE PCM16 subset is supported: format code 1, 16 bits per
//! sample, one or two interleaved channels. Stereo input is averaged to mono.

use thiserror::Error;

/// Errors raised while decoding or constructing audio.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedRiff(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
}

/// Mono floating point audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    source_name: Option<String>,
}

impl AudioClip {
    /// Builds a clip, checking that samples are finite, inside `[-1, 1]`
    /// and non-empty.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
            source_name: None,
        })
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = Some(name.into());
        self
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_name(&self) -> Option<&str> {
        self.source_name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    // Internal constructor for outputs whose invariants follow from the input.
    fn derived(&self, samples: Vec<f32>, sample_rate: u32) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            samples,
            sample_rate,
            source_name: self.source_name.clone(),
        }
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Returns true when `bytes` starts with a `RIFF....WAVE` header.
pub fn has_wave_magic(bytes: &[u8]) -> bool {
    bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE"
}

struct FmtChunk {
    format_code: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Decodes a PCM16 RIFF/WAVE byte buffer into a mono clip.
///
/// Integer samples map to floats by `v / 32768`. A data chunk whose declared
/// size runs past the end of the buffer is clamped to the bytes present.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if !has_wave_magic(bytes) {
        return Err(AudioError::MalformedRiff("missing RIFF/WAVE magic".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size);
        match id {
            b"fmt " => {
                if size < 16 || body_end > bytes.len() {
                    return Err(AudioError::MalformedRiff("truncated fmt chunk".into()));
                }
                fmt = Some(FmtChunk {
                    format_code: read_u16(bytes, body_start),
                    channels: read_u16(bytes, body_start + 2),
                    sample_rate: read_u32(bytes, body_start + 4),
                    bits_per_sample: read_u16(bytes, body_start + 14),
                });
            }
            b"data" => {
                data = Some(&bytes[body_start..body_end.min(bytes.len())]);
                break;
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end.saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedRiff("no fmt chunk".into()))?;
    if fmt.format_code != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "format code {} (only PCM = 1 is supported)",
            fmt.format_code
        )));
    }
    if fmt.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} bits per sample (only 16 is supported)",
            fmt.bits_per_sample
        )));
    }
    if !(1..=2).contains(&fmt.channels) {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels (only mono and stereo are supported)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::MalformedRiff("sample rate of zero".into()));
    }
    let data = data.ok_or_else(|| AudioError::MalformedRiff("no data chunk".into()))?;

    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    let samples: Vec<f32> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f32 = frame
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                .sum();
            sum / channels as f32
        })
        .collect();
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    Ok(AudioClip {
        samples,
        sample_rate: fmt.sample_rate,
        source_name: None,
    })
}

/// Encodes a clip as a mono PCM16 WAV file.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Linear-interpolation resampler.
///
/// Output sample `k` is read at source position `k * source_rate / target_rate`.
/// The output length is `round(n * target / source)`, never less than one.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target sample rate must be positive");
    let source_rate = clip.sample_rate;
    if target_rate == source_rate {
        return clip.clone();
    }
    let n = clip.samples.len();
    let out_len = ((n as f64 * target_rate as f64 / source_rate as f64).round() as usize).max(1);
    let step = source_rate as f64 / target_rate as f64;
    let src = &clip.samples;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let i = pos.floor() as usize;
            if i + 1 >= n {
                return src[n - 1];
            }
            let frac = pos - i as f64;
            let a = src[i] as f64;
            let b = src[i + 1] as f64;
            (a + (b - a) * frac) as f32
        })
        .collect();
    clip.derived(samples, target_rate)
}

/// Center-crops or symmetrically zero-pads to `round(duration_s * rate)` samples.
///
/// When the pad amount is odd the extra zero goes on the right.
pub fn pad_or_trim(clip: &AudioClip, duration_s: f64) -> AudioClip {
    assert!(duration_s > 0.0, "duration must be positive");
    let target = ((duration_s * clip.sample_rate as f64).round() as usize).max(1);
    let n = clip.samples.len();
    let samples = if n == target {
        clip.samples.clone()
    } else if n > target {
        let start = (n - target) / 2;
        clip.samples[start..start + target].to_vec()
    } else {
        let left = (target - n) / 2;
        let mut out = vec![0.0f32; target];
        out[left..left + n].copy_from_slice(&clip.samples);
        out
    };
    clip.derived(samples, clip.sample_rate)
}
