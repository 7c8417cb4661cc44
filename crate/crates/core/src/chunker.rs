//! Splitting token streams into model-sized chunks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("cannot chunk an empty token stream")]
    EmptyInput,
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
}

/// Chunking technique. Techniques are numbered 1, 2, 3 in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technique {
    /// Overlapping windows across the whole stream (technique 1).
    #[serde(rename = "sliding")]
    SlidingWindow,
    /// The trailing `k` tokens (technique 2).
    #[serde(rename = "last")]
    LastK,
    /// The leading `k` tokens (technique 3).
    #[serde(rename = "first")]
    FirstK,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::SlidingWindow, Technique::LastK, Technique::FirstK];

    pub fn number(self) -> u8 {
        match self {
            Technique::SlidingWindow => 1,
            Technique::LastK => 2,
            Technique::FirstK => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.number() == n)
    }
}

fn default_window() -> usize {
    410
}
fn default_overlap() -> usize {
    100
}
fn default_k() -> usize {
    510
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingConfig {
    pub technique: Technique,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self::for_technique(Technique::SlidingWindow)
    }
}

impl ChunkingConfig {
    pub fn for_technique(technique: Technique) -> Self {
        Self {
            technique,
            window: default_window(),
            overlap: default_overlap(),
            k: default_k(),
        }
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.window == 0 || self.overlap >= self.window {
            return Err(ChunkError::InvalidConfig(format!(
                "need 0 <= overlap < window, got overlap {} window {}",
                self.overlap, self.window
            )));
        }
        if self.k == 0 {
            return Err(ChunkError::InvalidConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Half-open token span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub ordinal: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn slice<'a, T>(&self, tokens: &'a [T]) -> &'a [T] {
        &tokens[self.start..self.end]
    }
}

/// Chunk spans over a stream of `total` tokens.
///
/// Sliding windows advance by `window - overlap` and stop after the first
/// window that reaches the end, so no chunk is contained in another.
pub fn chunk_spans(total: usize, cfg: &ChunkingConfig) -> Result<Vec<Chunk>, ChunkError> {
    cfg.validate()?;
    if total == 0 {
        return Err(ChunkError::EmptyInput);
    }
    let spans = match cfg.technique {
        Technique::SlidingWindow => {
            let stride = cfg.window - cfg.overlap;
            let mut spans = Vec::new();
            let mut start = 0;
            loop {
                let end = (start + cfg.window).min(total);
                spans.push((start, end));
                if end == total {
                    break;
                }
                start += stride;
            }
            spans
        }
        Technique::LastK => vec![(total.saturating_sub(cfg.k), total)],
        Technique::FirstK => vec![(0, cfg.k.min(total))],
    };
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| Chunk {
            start,
            end,
            ordinal,
        })
        .collect())
}

pub fn chunk<T>(tokens: &[T], cfg: &ChunkingConfig) -> Result<Vec<Chunk>, ChunkError> {
    chunk_spans(tokens.len(), cfg)
}

/// Closed-form sliding-window chunk count.
pub fn sliding_chunk_count(total: usize, window: usize, overlap: usize) -> usize {
    let stride = window - overlap;
    1 + total.saturating_sub(window).div_ceil(stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(total: usize, cfg: &ChunkingConfig) -> Vec<(usize, usize)> {
        chunk_spans(total, cfg)
            .unwrap()
            .iter()
            .map(|c| (c.start, c.end))
            .collect()
    }

    #[test]
    fn default_sliding_window_over_thousand_tokens() {
        assert_eq!(
            spans(1000, &ChunkingConfig::default()),
            [(0, 410), (310, 720), (620, 1000)]
        );
    }

    #[test]
    fn short_streams_clamp() {
        assert_eq!(spans(300, &ChunkingConfig::for_technique(Technique::LastK)), [(0, 300)]);
        assert_eq!(spans(300, &ChunkingConfig::for_technique(Technique::FirstK)), [(0, 300)]);
        assert_eq!(spans(300, &ChunkingConfig::default()), [(0, 300)]);
        assert_eq!(spans(900, &ChunkingConfig::for_technique(Technique::LastK)), [(390, 900)]);
        assert_eq!(spans(900, &ChunkingConfig::for_technique(Technique::FirstK)), [(0, 510)]);
    }

    #[test]
    fn errors() {
        assert_eq!(chunk_spans(0, &ChunkingConfig::default()), Err(ChunkError::EmptyInput));
        let bad = ChunkingConfig {
            overlap: 410,
            ..ChunkingConfig::default()
        };
        assert!(matches!(chunk_spans(5, &bad), Err(ChunkError::InvalidConfig(_))));
        let bad = ChunkingConfig {
            k: 0,
            ..ChunkingConfig::for_technique(Technique::FirstK)
        };
        assert!(chunk_spans(5, &bad).is_err());
    }

    #[test]
    fn config_json() {
        let cfg: ChunkingConfig = serde_json::from_str(r#"{"technique": "last"}"#).unwrap();
        assert_eq!(cfg, ChunkingConfig::for_technique(Technique::LastK));
        assert_eq!(
            serde_json::to_string(&ChunkingConfig::default()).unwrap(),
            r#"{"technique":"sliding","window":410,"overlap":100,"k":510}"#
        );
    }

    proptest! {
        #[test]
        fn sliding_window_invariants(total in 1usize..3000, window in 1usize..500, overlap_frac in 0.0f64..1.0) {
            let overlap = ((window as f64) * overlap_frac) as usize;
            prop_assume!(overlap < window);
            let cfg = ChunkingConfig { technique: Technique::SlidingWindow, window, overlap, k: 1 };
            let chunks = chunk_spans(total, &cfg).unwrap();
            prop_assert_eq!(chunks.len(), sliding_chunk_count(total, window, overlap));
            prop_assert_eq!(chunks[0].start, 0);
            prop_assert_eq!(chunks.last().unwrap().end, total);
            for (i, pair) in chunks.windows(2).enumerate() {
                prop_assert_eq!(pair[0].ordinal, i);
                prop_assert!(pair[1].start <= pair[0].end, "gap");
                prop_assert_eq!(pair[0].end - pair[1].start, overlap.min(pair[0].len()));
                prop_assert!(pair[1].end > pair[0].end, "contained chunk");
            }
        }

        #[test]
        fn single_chunk_techniques(total in 1usize..2000, k in 1usize..1000) {
            for technique in [Technique::LastK, Technique::FirstK] {
                let cfg = ChunkingConfig { technique, window: 10, overlap: 0, k };
                let chunks = chunk_spans(total, &cfg).unwrap();
                prop_assert_eq!(chunks.len(), 1);
                prop_assert_eq!(chunks[0].len(), k.min(total));
            }
        }
    }
}
