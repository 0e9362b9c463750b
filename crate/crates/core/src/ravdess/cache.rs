//! Binary feature cache.
//!
//! Layout (little-endian): `"SERFEAT1"`, u32 version (1), u32 example count,
//! u32 height, u32 width, u32 config length, the pipeline config as JSON,
//! then per example: u8 label, u8 actor, u8 intensity code, u8 reserved (0)
//! and `height * width` f32 values.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::corpus::LabeledExample;
use super::meta::Intensity;
use super::split::SplitKey;
use super::RavdessError;
use crate::features::{FeatureTensor, PipelineConfig};

pub const CACHE_MAGIC: &[u8; 8] = b"SERFEAT1";
pub const CACHE_VERSION: u32 = 1;

/// One cached example: the tensor plus the metadata needed for splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedExample {
    pub features: FeatureTensor,
    pub label: usize,
    pub actor: u8,
    pub intensity: Intensity,
}

impl From<&LabeledExample> for CachedExample {
    fn from(ex: &LabeledExample) -> Self {
        Self {
            features: ex.features.clone(),
            label: ex.label,
            actor: ex.meta.actor,
            intensity: ex.meta.intensity,
        }
    }
}

impl SplitKey for CachedExample {
    fn emotion_label(&self) -> usize {
        self.label
    }
    fn actor(&self) -> u8 {
        self.actor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub config: PipelineConfig,
    pub examples: Vec<CachedExample>,
}

impl FeatureCache {
    pub fn shape(&self) -> (usize, usize) {
        self.config.shape()
    }
}

pub fn encode_feature_cache(cache: &FeatureCache) -> Result<Vec<u8>, RavdessError> {
    let (h, w) = cache.shape();
    let config = serde_json::to_vec(&cache.config).expect("config is always serializable");
    let mut out = Vec::with_capacity(28 + config.len() + cache.examples.len() * (4 + 4 * h * w));
    out.extend_from_slice(CACHE_MAGIC);
    for v in [
        CACHE_VERSION,
        cache.examples.len() as u32,
        h as u32,
        w as u32,
        config.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&config);
    for ex in &cache.examples {
        if ex.features.shape() != (h, w) {
            return Err(RavdessError::ShapeMismatch {
                expected: (h, w),
                actual: ex.features.shape(),
            });
        }
        let label =
            u8::try_from(ex.label).map_err(|_| RavdessError::BadCache(format!("label {} too large", ex.label)))?;
        out.extend_from_slice(&[label, ex.actor, ex.intensity.code(), 0]);
        for v in ex.features.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_feature_cache(cache: &FeatureCache, path: &Path) -> Result<(), RavdessError> {
    let bytes = encode_feature_cache(cache)?;
    let io_err = |source| RavdessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RavdessError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(RavdessError::TruncatedFile)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, RavdessError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_feature_cache(bytes: &[u8]) -> Result<FeatureCache, RavdessError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < CACHE_MAGIC.len() {
        return Err(RavdessError::TruncatedFile);
    }
    if r.take(8)? != CACHE_MAGIC {
        return Err(RavdessError::BadMagic);
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(RavdessError::VersionMismatch(version));
    }
    let n = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let config_len = r.u32()? as usize;
    let config: PipelineConfig =
        serde_json::from_slice(r.take(config_len)?).map_err(|e| RavdessError::BadCache(format!("config: {e}")))?;
    if config.shape() != (h, w) {
        return Err(RavdessError::BadCache(format!(
            "header shape {h}x{w} disagrees with config {:?}",
            config.shape()
        )));
    }
    let mut examples = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let head = r.take(4)?;
        let intensity = Intensity::from_code(head[2])
            .ok_or_else(|| RavdessError::BadCache(format!("intensity code {}", head[2])))?;
        let values = r
            .take(4 * h * w)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        examples.push(CachedExample {
            features: FeatureTensor::new(h, w, values).expect("length follows from header"),
            label: head[0] as usize,
            actor: head[1],
            intensity,
        });
    }
    if r.pos != bytes.len() {
        return Err(RavdessError::BadCache(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(FeatureCache { config, examples })
}

pub fn read_feature_cache(path: &Path) -> Result<FeatureCache, RavdessError> {
    let bytes = fs::read(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => RavdessError::NotFound(path.to_path_buf()),
        _ => RavdessError::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    decode_feature_cache(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SplitMix64;

    fn sample_cache(n: usize) -> FeatureCache {
        let config = PipelineConfig {
            height: 4,
            width: 3,
            ..PipelineConfig::default()
        };
        let mut rng = SplitMix64::new(1);
        let examples = (0..n)
            .map(|i| CachedExample {
                features: FeatureTensor::new(4, 3, (0..12).map(|_| rng.next_normal() as f32).collect()).unwrap(),
                label: i % 8,
                actor: (i % 24 + 1) as u8,
                intensity: if i % 3 == 0 {
                    Intensity::Strong
                } else {
                    Intensity::Normal
                },
            })
            .collect();
        FeatureCache { config, examples }
    }

    #[test]
    fn round_trip_is_lossless() {
        let cache = sample_cache(10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        write_feature_cache(&cache, &path).unwrap();
        let back = read_feature_cache(&path).unwrap();
        assert_eq!(back, cache);
        for (a, b) in back.examples.iter().zip(&cache.examples) {
            let bits = |t: &FeatureTensor| t.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.features), bits(&b.features));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_feature_cache(&sample_cache(2)).unwrap();
        assert_eq!(&bytes[..8], b"SERFEAT1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
    }

    #[test]
    fn error_paths() {
        let mut bytes = encode_feature_cache(&sample_cache(3)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_feature_cache(&bad), Err(RavdessError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(
            decode_feature_cache(&bad),
            Err(RavdessError::VersionMismatch(2))
        ));
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(decode_feature_cache(&bytes), Err(RavdessError::TruncatedFile)));
        assert!(matches!(decode_feature_cache(b"SER"), Err(RavdessError::TruncatedFile)));
        assert!(matches!(
            read_feature_cache(Path::new("/no/such/cache.bin")),
            Err(RavdessError::NotFound(_))
        ));
    }
}
