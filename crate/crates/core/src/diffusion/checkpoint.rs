//! Checkpoints: a JSON manifest beside a little-endian `f32` blob holding the
//! parameters followed by their EMA copy, in manifest order.

use super::{Normalization, TrainConfig};
use crate::denoiser::{Denoiser, DenoiserConfig};
use crate::error::{invalid, Result};
use crate::layout::RepresentationLayout;
use crate::nn::ParamSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const FORMAT: &str = "semboost-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextSpec {
    /// `"toy"` or `"precomputed:<dir>"`.
    pub embedder: String,
    pub dim: usize,
    pub max_words: usize,
}

impl Default for TextSpec {
    fn default() -> Self {
        Self { embedder: "toy".into(), dim: crate::text::DEFAULT_TEXT_DIM, max_words: crate::text::DEFAULT_MAX_WORDS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub config: DenoiserConfig,
    pub representation: RepresentationLayout,
    pub fps: f64,
    pub step: usize,
    pub text: TextSpec,
    pub train: TrainConfig,
    pub normalization: Normalization,
    pub params: Vec<ParamSpec>,
    pub blob: String,
    pub blob_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: Vec<f32>,
    pub ema: Vec<f32>,
}

pub fn blob_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bin");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn model(&self) -> Result<Denoiser> {
        Denoiser::new(self.manifest.config.clone())
    }

    /// Writes `path` (manifest) and `path.bin` (blob).
    pub fn save(&mut self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.params.len());
        for v in self.params.iter().chain(&self.ema) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let blob = blob_path(path);
        self.manifest.blob = blob.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.manifest.blob_sha256 = hex::encode(Sha256::digest(&bytes));
        std::fs::write(&blob, &bytes)?;
        std::fs::write(path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if manifest.format != FORMAT {
            return Err(invalid(format!("unknown checkpoint format {:?}", manifest.format)));
        }
        let blob = path.with_file_name(&manifest.blob);
        let bytes = std::fs::read(&blob)?;
        if hex::encode(Sha256::digest(&bytes)) != manifest.blob_sha256 {
            return Err(invalid(format!("{} does not match its manifest hash", blob.display())));
        }
        let n: usize = manifest.params.iter().map(|s| s.len()).sum();
        if n != manifest.config.param_count() || bytes.len() != 8 * n {
            return Err(invalid("checkpoint blob size does not match its configuration"));
        }
        let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let (params, ema) = values.split_at(n);
        Ok(Self { params: params.to_vec(), ema: ema.to_vec(), manifest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let config = DenoiserConfig::toy(6, 8);
        let model = Denoiser::new(config.clone()).unwrap();
        let params: Vec<f32> = model.init_params(1);
        let ema: Vec<f32> = params.iter().map(|v| v * 0.5).collect();
        let mut ck = Checkpoint {
            manifest: CheckpointManifest {
                format: FORMAT.into(),
                config,
                representation: RepresentationLayout::absolute(),
                fps: 20.0,
                step: 3,
                text: TextSpec { embedder: "toy".into(), dim: 8, max_words: 4 },
                train: TrainConfig::default(),
                normalization: Normalization { mean: vec![0.0; 6], std: vec![1.0; 6], min: vec![-1.0; 6], max: vec![1.0; 6] },
                params: model.layout.specs.clone(),
                blob: String::new(),
                blob_sha256: String::new(),
            },
            params,
            ema,
        };
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        assert!(blob_path(&path).exists());
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        std::fs::write(blob_path(&path), [0u8; 8]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
