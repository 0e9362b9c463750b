use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use super::meta::{parse_filename, Emotion, Intensity, RavdessMeta};
use super::RavdessError;
use crate::audio::read_wav;
use crate::features::{featurize, FeatureTensor, PipelineConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub meta: RavdessMeta,
}

/// Counts over a scanned corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Census {
    pub total: usize,
    /// Indexed by class index (emotion code - 1).
    pub per_emotion: [usize; 8],
    /// Indexed by actor - 1.
    pub per_actor: [usize; 24],
    /// `[normal, strong]`.
    pub per_intensity: [usize; 2],
    /// Files that were seen but not accepted, with the reason.
    pub warnings: Vec<String>,
}

impl Census {
    pub fn empty() -> Self {
        Self {
            total: 0,
            per_emotion: [0; 8],
            per_actor: [0; 24],
            per_intensity: [0; 2],
            warnings: Vec::new(),
        }
    }

    pub fn from_metas<'a>(metas: impl IntoIterator<Item = &'a RavdessMeta>) -> Self {
        let mut census = Self::empty();
        for meta in metas {
            census.add(meta);
        }
        census
    }

    fn add(&mut self, meta: &RavdessMeta) {
        self.total += 1;
        self.per_emotion[meta.emotion.class_index()] += 1;
        self.per_actor[meta.actor as usize - 1] += 1;
        self.per_intensity[(meta.intensity == Intensity::Strong) as usize] += 1;
    }

    pub fn emotion_count(&self, emotion: Emotion) -> usize {
        self.per_emotion[emotion.class_index()]
    }
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "files: {}", self.total)?;
        writeln!(f, "per emotion:")?;
        for &e in Emotion::ALL {
            writeln!(f, "  {:<10} {}", e.name(), self.emotion_count(e))?;
        }
        writeln!(
            f,
            "per intensity: normal {}, strong {}",
            self.per_intensity[0], self.per_intensity[1]
        )?;
        let actors: Vec<String> = self
            .per_actor
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{:02}:{n}", i + 1))
            .collect();
        writeln!(f, "per actor: {}", actors.join(" "))?;
        if !self.warnings.is_empty() {
            writeln!(f, "warnings ({}):", self.warnings.len())?;
            for w in &self.warnings {
                writeln!(f, "  {w}")?;
            }
        }
        Ok(())
    }
}

fn is_wav(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Recursively collects audio-only speech files under `root`, sorted by path.
/// `.wav` files with unparseable names or other modalities are reported in
/// the census warnings.
pub fn scan_corpus(root: &Path) -> Result<(Vec<CorpusEntry>, Census), RavdessError> {
    if !root.is_dir() {
        return Err(RavdessError::RootNotFound(root.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in WalkDir::new(root) {
        let entry = entry.map_err(|e| RavdessError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e
                .into_io_error()
                .unwrap_or_else(|| io::Error::other("directory walk failed")),
        })?;
        if entry.file_type().is_file() && is_wav(entry.path()) {
            paths.push(entry.into_path());
        }
    }
    paths.sort();

    let mut entries = Vec::with_capacity(paths.len());
    let mut census = Census::empty();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match parse_filename(&name) {
            Ok(meta) if meta.is_speech_audio() => {
                census.add(&meta);
                entries.push(CorpusEntry { path, meta });
            }
            Ok(meta) => census.warnings.push(format!(
                "{}: skipped ({} / {})",
                path.display(),
                meta.modality,
                meta.channel
            )),
            Err(e) => census.warnings.push(format!("{}: {e}", path.display())),
        }
    }
    Ok((entries, census))
}

#[derive(Debug, Clone, Serialize)]
pub struct StagingReport {
    pub extracted_files: usize,
    pub count: usize,
    pub census: Census,
}

/// Extracts a ZIP archive into `dest` and scans the result.
pub fn stage_archive(archive: &Path, dest: &Path) -> Result<StagingReport, RavdessError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RavdessError::Io { path, source }
    };
    let file = fs::File::open(archive).map_err(io_err(archive))?;
    let mut zip = zip::ZipArchive::new(file).map_err(|e| RavdessError::BadArchive(e.to_string()))?;
    fs::create_dir_all(dest).map_err(io_err(dest))?;
    let mut extracted = 0;
    for i in 0..zip.len() {
        let mut item = zip.by_index(i).map_err(|e| RavdessError::BadArchive(e.to_string()))?;
        let Some(rel) = item.enclosed_name() else {
            return Err(RavdessError::BadArchive(format!("unsafe entry path {:?}", item.name())));
        };
        let out = dest.join(rel);
        if item.is_dir() {
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            continue;
        }
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut sink = fs::File::create(&out).map_err(io_err(&out))?;
        io::copy(&mut item, &mut sink).map_err(|e| {
            if e.kind() == io::ErrorKind::InvalidData {
                RavdessError::BadArchive(e.to_string())
            } else {
                RavdessError::Io {
                    path: out.clone(),
                    source: e,
                }
            }
        })?;
        extracted += 1;
    }
    let (entries, census) = scan_corpus(dest)?;
    Ok(StagingReport {
        extracted_files: extracted,
        count: entries.len(),
        census,
    })
}

/// A featurized corpus file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureTensor,
    /// Emotion code - 1.
    pub label: usize,
    pub meta: RavdessMeta,
    pub path: PathBuf,
}

/// Decodes and featurizes every entry. Work is spread over the rayon pool;
/// the output keeps the input order.
pub fn load_examples(entries: &[CorpusEntry], cfg: &PipelineConfig) -> Result<Vec<LabeledExample>, RavdessError> {
    entries
        .par_iter()
        .map(|entry| {
            let bytes = fs::read(&entry.path).map_err(|source| RavdessError::Io {
                path: entry.path.clone(),
                source,
            })?;
            let clip = read_wav(&bytes).map_err(|source| RavdessError::Audio {
                path: entry.path.clone(),
                source,
            })?;
            let features = featurize(&clip, cfg).map_err(|source| RavdessError::Features {
                path: entry.path.clone(),
                source,
            })?;
            Ok(LabeledExample {
                features,
                label: entry.meta.label(),
                meta: entry.meta,
                path: entry.path.clone(),
            })
        })
        .collect()
}
