//! Speech emotion recognition from log-spectrogram features.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`audio`]: PCM16 WAV decoding, resampling and fixed-length conditioning
//! - [`features`]: radix-2 FFT, STFT log-spectrograms, standardized model inputs
//! - [`ravdess`]: the RAVDESS filename grammar, corpus census, splits and feature caches
//! - [`nn`]: a from-scratch CNN engine with gradient checking
//! - [`models`]: the convolutional classifier, an MLP baseline, checkpoints and prediction
//! - [`train`]: training loop, classification metrics, learning curves and model comparison

pub mod audio;
pub mod features;
pub mod models;
pub mod nn;
pub mod ravdess;
pub mod train;

pub use audio::{read_wav, AudioClip, AudioError};
pub use features::{featurize, FeatureTensor, PipelineConfig};
pub use models::{Model, ModelKind};
pub use ravdess::{Emotion, RavdessMeta};
