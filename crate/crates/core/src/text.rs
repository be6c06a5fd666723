//! Text conditioning: a sentence vector plus per-token vectors with a padding
//! mask, behind a small trait so a real encoder can be swapped in.

use crate::error::{Error, Result};
use crate::io::read_matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

pub const DEFAULT_TEXT_DIM: usize = 512;
pub const DEFAULT_MAX_WORDS: usize = 77;

#[derive(Debug, Clone, PartialEq)]
pub struct TextCondition {
    pub dim: usize,
    pub sentence: Vec<f64>,
    /// `max_words × dim`, row-major; rows past the mask are zero.
    pub words: Vec<f64>,
    pub mask: Vec<bool>,
    pub is_null: bool,
}

impl TextCondition {
    pub fn max_words(&self) -> usize {
        self.mask.len()
    }

    pub fn token_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn word(&self, k: usize) -> &[f64] {
        &self.words[k * self.dim..(k + 1) * self.dim]
    }

    /// Rows of the real tokens only (padding is always at the end).
    pub fn real_words(&self) -> &[f64] {
        &self.words[..self.token_count() * self.dim]
    }
}

/// The unconditional embedding: all zeros, nothing unmasked.
pub fn null_condition(dim: usize, max_words: usize) -> TextCondition {
    TextCondition {
        dim,
        sentence: vec![0.0; dim],
        words: vec![0.0; dim * max_words],
        mask: vec![false; max_words],
        is_null: true,
    }
}

pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn max_words(&self) -> usize;
    fn embed(&self, text: &str) -> Result<TextCondition>;

    fn null(&self) -> TextCondition {
        null_condition(self.dim(), self.max_words())
    }
}

/// Lowercases and splits on anything that is not alphanumeric, `-` or `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash-codebook embedder: each token maps to a fixed unit vector drawn from
/// a seeded stream; the sentence vector is the normalized mean of the content
/// tokens. Rows are `[<sos>, tokens.., <eos>]`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ToyEmbedder {
    pub dim: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for ToyEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_TEXT_DIM, max_words: DEFAULT_MAX_WORDS, seed: 0x5eb0_0575 }
    }
}

impl ToyEmbedder {
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ self.seed);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        v
    }
}

impl TextEmbedder for ToyEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_words(&self) -> usize {
        self.max_words
    }

    fn embed(&self, text: &str) -> Result<TextCondition> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        tokens.truncate(self.max_words.saturating_sub(2));
        let mut cond = null_condition(self.dim, self.max_words);
        cond.is_null = false;
        let rows = std::iter::once("<sos>").chain(tokens.iter().map(String::as_str)).chain(std::iter::once("<eos>"));
        for (k, tok) in rows.enumerate() {
            let v = self.token_vector(tok);
            cond.words[k * self.dim..(k + 1) * self.dim].copy_from_slice(&v);
            cond.mask[k] = true;
            if k > 0 && k <= tokens.len() {
                cond.sentence.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
            }
        }
        let n = cond.sentence.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            cond.sentence.iter_mut().for_each(|x| *x /= n);
        }
        Ok(cond)
    }
}

/// Loads conditions computed elsewhere. Each caption lives at
/// `<dir>/<sha256(text)>.{json,bin}` in the motion matrix format: row 0 is the
/// sentence vector, the remaining rows are the real token vectors.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    pub dir: PathBuf,
    pub dim: usize,
    pub max_words: usize,
}

impl PrecomputedEmbedder {
    pub fn key(text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

impl TextEmbedder for PrecomputedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_words(&self) -> usize {
        self.max_words
    }

    fn embed(&self, text: &str) -> Result<TextCondition> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let (h, values) = read_matrix(&self.dir.join(Self::key(text)))?;
        if h.dim != self.dim || h.n_frames < 2 || h.n_frames - 1 > self.max_words {
            return Err(Error::Dimension(format!(
                "precomputed condition is {}x{}, expected (2..={})x{}",
                h.n_frames,
                h.dim,
                self.max_words + 1,
                self.dim
            )));
        }
        let mut cond = null_condition(self.dim, self.max_words);
        cond.is_null = false;
        cond.sentence.copy_from_slice(&values[..self.dim]);
        let words = &values[self.dim..];
        cond.words[..words.len()].copy_from_slice(words);
        cond.mask[..h.n_frames - 1].iter_mut().for_each(|m| *m = true);
        Ok(cond)
    }
}

/// Resolves an embedder from its config name: `"toy"` or `"precomputed:<dir>"`.
pub fn embedder_by_name(name: &str, dim: usize, max_words: usize) -> Result<Box<dyn TextEmbedder>> {
    if name == "toy" {
        return Ok(Box::new(ToyEmbedder { dim, max_words, ..ToyEmbedder::default() }));
    }
    if let Some(dir) = name.strip_prefix("precomputed:") {
        return Ok(Box::new(PrecomputedEmbedder { dir: PathBuf::from(dir), dim, max_words }));
    }
    Err(Error::Invalid(format!("unknown embedder '{name}'")))
}
