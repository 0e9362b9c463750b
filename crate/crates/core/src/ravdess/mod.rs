//! The RAVDESS speech corpus: filename grammar, census, splits and the
//! feature cache.

mod cache;
mod corpus;
mod meta;
mod split;

pub use cache::{
    decode_feature_cache, encode_feature_cache, read_feature_cache, write_feature_cache, CachedExample, FeatureCache,
    CACHE_MAGIC, CACHE_VERSION,
};
pub use corpus::{load_examples, scan_corpus, stage_archive, Census, CorpusEntry, LabeledExample, StagingReport};
pub use meta::{
    emotion_labels, parse_filename, Emotion, Gender, Intensity, Modality, RavdessMeta, Statement, VocalChannel,
};
pub use split::{split_dataset, split_indices, DatasetSplit, SplitIndices, SplitKey, SplitStrategy};

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::audio::AudioError;
use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum RavdessError {
    #[error("expected a .wav file name, got {0:?}")]
    NotWav(String),
    #[error("expected 7 dash-separated parts, found {0}")]
    BadPartCount(usize),
    #[error("part {index} ({part:?}) is not a two-digit number")]
    NonNumericPart { index: usize, part: String },
    #[error("{field} code {value:02} is out of range")]
    CodeOutOfRange { field: &'static str, value: u8 },
    #[error("neutral emotion cannot have strong intensity")]
    NeutralStrongConflict,
    #[error("corpus root {0} does not exist")]
    RootNotFound(PathBuf),
    #[error("bad archive: {0}")]
    BadArchive(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: no such file")]
    NotFound(PathBuf),
    #[error("{path}: {source}")]
    Audio { path: PathBuf, source: AudioError },
    #[error("{path}: {source}")]
    Features { path: PathBuf, source: FeatureError },
    #[error("cannot split an empty example list")]
    EmptyInput,
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("feature cache has the wrong magic bytes")]
    BadMagic,
    #[error("unsupported feature cache version {0}")]
    VersionMismatch(u32),
    #[error("feature cache is truncated")]
    TruncatedFile,
    #[error("malformed feature cache: {0}")]
    BadCache(String),
    #[error("feature tensor is {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

impl PartialEq for RavdessError {
    // Io errors never compare equal; everything else compares by message.
    fn eq(&self, other: &Self) -> bool {
        !matches!(self, RavdessError::Io { .. }) && self.to_string() == other.to_string()
    }
}
