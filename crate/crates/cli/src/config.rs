use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use emoser_core::features::PipelineConfig;
use emoser_core::models::{ModelKind, DEFAULT_NUM_CLASSES};
use emoser_core::ravdess::SplitStrategy;
use emoser_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub ratio: f64,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            ratio: 0.75,
            seed: 0,
            strategy: SplitStrategy::StratifiedByEmotion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub num_classes: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            kind: ModelKind::CnnFig1,
            num_classes: DEFAULT_NUM_CLASSES,
        }
    }
}

/// Default locations used when a flag is omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub split: SplitSettings,
    pub model: ModelSettings,
    pub paths: Paths,
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: AppConfig = serde_json::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        cfg.validate().map_err(|e| UsageError(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
                Self::parse(&text).with_context(|| path.display().to_string())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.train.validate()?;
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            bail!(
                "split.ratio must lie strictly between 0 and 1, got {}",
                self.split.ratio
            );
        }
        if self.model.num_classes < 2 {
            bail!("model.num_classes must be at least 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(AppConfig::parse("{}").unwrap(), AppConfig::default());
    }

    #[test]
    fn nested_fields() {
        let cfg = AppConfig::parse(
            r#"{"pipeline": {"height": 32, "width": 32},
                "train": {"epochs": 5, "batch_size": 8, "optimizer": {"kind": "adam", "lr": 0.0005}},
                "split": {"ratio": 0.8, "strategy": "speaker"},
                "model": {"kind": "dnn_baseline"},
                "paths": {"cache": "c.bin"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.pipeline.height, 32);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.split.strategy, SplitStrategy::SpeakerIndependent);
        assert_eq!(cfg.model.kind, ModelKind::DnnBaseline);
        assert_eq!(cfg.paths.cache.as_deref(), Some(Path::new("c.bin")));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for text in [
            r#"{"trian": {}}"#,
            r#"{"train": {"epochs": 5, "lr": 0.1}}"#,
            r#"{"pipeline": {"fft": 512}}"#,
            r#"{"split": {"ratio": 1.0}}"#,
            r#"{"train": {"epochs": 0}}"#,
            r#"{"pipeline": {"fft_size": 500}}"#,
            "not json",
        ] {
            let err = AppConfig::parse(text).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{text}");
        }
    }
}
