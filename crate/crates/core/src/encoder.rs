//! Chunk encoders.
//!
//! The built-in encoder hashes lowercased word n-grams into `dim` buckets
//! with seeded 64-bit FNV-1a, counts them, and L2-normalizes the counts.
//! Any other encoder can be plugged in through [`ChunkEncoder`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncoderError {
    #[error("cannot encode an empty chunk")]
    EmptyChunk,
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("model uses an external encoder; supply one explicitly")]
    ExternalEncoderRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    HashedNgram,
    External,
}

fn default_dim() -> usize {
    4096
}
fn default_ngram_max() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "EncoderConfig::default_kind")]
    pub kind: EncoderKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_ngram_max")]
    pub ngram_max: usize,
    #[serde(default)]
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::HashedNgram,
            dim: default_dim(),
            ngram_max: default_ngram_max(),
            hash_seed: 0,
        }
    }
}

impl EncoderConfig {
    fn default_kind() -> EncoderKind {
        EncoderKind::HashedNgram
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if !self.dim.is_power_of_two() {
            return Err(EncoderError::InvalidConfig(format!(
                "dim must be a power of two, got {}",
                self.dim
            )));
        }
        if !(1..=3).contains(&self.ngram_max) {
            return Err(EncoderError::InvalidConfig(format!(
                "ngram_max must be 1, 2 or 3, got {}",
                self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|&i| i as usize)
    }
}

/// Maps a chunk of tokens to a fixed-width vector.
pub trait ChunkEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, tokens: &[&str]) -> Result<SparseVec, EncoderError>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the seed's little-endian bytes followed by `bytes`.
pub fn fnv1a_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in seed.to_le_bytes().iter().chain(bytes) {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[derive(Debug, Clone)]
pub struct HashedNgramEncoder {
    config: EncoderConfig,
}

impl HashedNgramEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self, EncoderError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn bucket(&self, ngram: &str) -> usize {
        (fnv1a_seeded(self.config.hash_seed, ngram.as_bytes()) & (self.config.dim as u64 - 1))
            as usize
    }
}

impl ChunkEncoder for HashedNgramEncoder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn encode(&self, tokens: &[&str]) -> Result<SparseVec, EncoderError> {
        if tokens.is_empty() {
            return Err(EncoderError::EmptyChunk);
        }
        let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut counts = std::collections::BTreeMap::<u32, f64>::new();
        for n in 1..=self.config.ngram_max.min(lowered.len()) {
            for gram in lowered.windows(n) {
                *counts.entry(self.bucket(&gram.join(" ")) as u32).or_insert(0.0) += 1.0;
            }
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        let (indices, values) = counts.into_iter().map(|(i, c)| (i, c / norm)).unzip();
        Ok(SparseVec { indices, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encoder(ngram_max: usize) -> HashedNgramEncoder {
        HashedNgramEncoder::new(EncoderConfig {
            ngram_max,
            ..EncoderConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        // Unseeded FNV-1a reference: hash("a") = 0xaf63dc4c8601ec8c.
        let mut h = FNV_OFFSET;
        for &b in b"a" {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        assert_eq!(h, 0xaf63_dc4c_8601_ec8c);
        assert_ne!(fnv1a_seeded(0, b"a"), fnv1a_seeded(1, b"a"));
    }

    #[test]
    fn repeated_token_is_one_unit_bucket() {
        let v = encoder(1).encode(&["a", "a"]).unwrap();
        assert_eq!(v.values, [1.0]);
        assert_eq!(v.indices.len(), 1);
    }

    #[test]
    fn encoding_is_deterministic_and_case_folded() {
        let e = encoder(2);
        assert_eq!(
            e.encode(&["The", "Appeal"]).unwrap(),
            e.encode(&["the", "appeal"]).unwrap()
        );
        assert_eq!(e.encode(&["x"]).unwrap(), e.encode(&["x"]).unwrap());
    }

    #[test]
    fn validation() {
        assert!(EncoderConfig { dim: 1000, ..EncoderConfig::default() }.validate().is_err());
        assert!(EncoderConfig { ngram_max: 4, ..EncoderConfig::default() }.validate().is_err());
        assert_eq!(encoder(1).encode(&[]), Err(EncoderError::EmptyChunk));
    }

    proptest! {
        #[test]
        fn unit_norm(tokens in proptest::collection::vec("[a-z]{1,6}", 1..40), n in 1usize..=3) {
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let v = encoder(n).encode(&refs).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            prop_assert!(v.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.max_index().unwrap() < 4096);
        }
    }
}
