//! Hierarchical verdict classifier.
//!
//! Each chunk vector `u_i` is scored by additive attention,
//! `s_i = v · tanh(W u_i + b)`, the scores are softmax-normalized into `α`,
//! the pooled vector is `d = Σ α_i u_i` and the verdict probability is
//! `p = σ(w · d + c)`. Attention has no positional term, so permuting the
//! chunks permutes `α` and leaves `d` and `p` unchanged.

mod io;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{chunk, ChunkError, ChunkingConfig, Technique};
use crate::corpus::{DocView, Document};
use crate::encoder::{ChunkEncoder, EncoderConfig, EncoderError, EncoderKind, HashedNgramEncoder, SparseVec};
use crate::pipeline::{resolve_input, InputSelection, PipelineConfig, PipelineError};

pub use io::{MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use train::{train, Example, TrainConfig, TrainReport};

pub const DEFAULT_ATTENTION_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no chunk vectors to pool")]
    NoChunks,
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("document {0} has no verdict label")]
    MissingLabel(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    dim: usize,
    attn: usize,
    /// Attention projection stored input-major: entry `(a, j)` of the
    /// `attn × dim` matrix lives at `j * attn + a`, so a sparse input
    /// coordinate touches one contiguous block.
    proj: Vec<f64>,
    pub attn_vec: Vec<f64>,
    pub attn_bias: Vec<f64>,
    pub readout: Vec<f64>,
    pub readout_bias: f64,
}

impl Params {
    pub fn zeros(dim: usize, attn: usize) -> Self {
        Self {
            dim,
            attn,
            proj: vec![0.0; dim * attn],
            attn_vec: vec![0.0; attn],
            attn_bias: vec![0.0; attn],
            readout: vec![0.0; dim],
            readout_bias: 0.0,
        }
    }

    /// Uniform(-scale, scale) in the order projection (row-major by
    /// attention unit), attention vector, attention bias, readout, bias.
    pub fn random(dim: usize, attn: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dim, attn);
        for a in 0..attn {
            for j in 0..dim {
                p.set_proj(a, j, rng.random_range(-scale..scale));
            }
        }
        for x in p.attn_vec.iter_mut().chain(&mut p.attn_bias).chain(&mut p.readout) {
            *x = rng.random_range(-scale..scale);
        }
        p.readout_bias = rng.random_range(-scale..scale);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn attention_dim(&self) -> usize {
        self.attn
    }

    pub fn proj(&self, a: usize, j: usize) -> f64 {
        self.proj[j * self.attn + a]
    }

    pub fn set_proj(&mut self, a: usize, j: usize, value: f64) {
        self.proj[j * self.attn + a] = value;
    }

    /// The projection as an `attn × dim` row-major matrix.
    pub fn proj_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.proj.len());
        for a in 0..self.attn {
            for j in 0..self.dim {
                out.push(self.proj(a, j));
            }
        }
        out
    }

    pub fn from_row_major_proj(&mut self, data: &[f64]) {
        for a in 0..self.attn {
            for j in 0..self.dim {
                self.set_proj(a, j, data[a * self.dim + j]);
            }
        }
    }

    /// Flat views over every tensor, in a fixed order.
    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.proj,
            &self.attn_vec,
            &self.attn_bias,
            &self.readout,
            std::slice::from_ref(&self.readout_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.proj,
            &mut self.attn_vec,
            &mut self.attn_bias,
            &mut self.readout,
            std::slice::from_mut(&mut self.readout_bias),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_chunks(&self, chunks: &[SparseVec]) -> Result<(), PredictError> {
        if chunks.is_empty() {
            return Err(PredictError::NoChunks);
        }
        for (i, u) in chunks.iter().enumerate() {
            if u.indices.len() != u.values.len() {
                return Err(PredictError::DimensionMismatch(format!(
                    "chunk {i} has {} indices but {} values",
                    u.indices.len(),
                    u.values.len()
                )));
            }
            if let Some(max) = u.max_index().filter(|&m| m >= self.dim) {
                return Err(PredictError::DimensionMismatch(format!(
                    "chunk {i} has coordinate {max} but the model dimension is {}",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against label `y`, computed stably.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub hidden: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub readout_dots: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

impl Params {
    pub(crate) fn trace(&self, chunks: &[SparseVec]) -> Result<Trace, PredictError> {
        self.check_chunks(chunks)?;
        let attn = self.attn;
        let mut hidden = Vec::with_capacity(chunks.len());
        let mut scores = Vec::with_capacity(chunks.len());
        for u in chunks {
            let mut h = self.attn_bias.clone();
            for (j, x) in u.iter() {
                let col = &self.proj[j * attn..(j + 1) * attn];
                for (acc, wj) in h.iter_mut().zip(col) {
                    *acc += wj * x;
                }
            }
            h.iter_mut().for_each(|x| *x = x.tanh());
            scores.push(h.iter().zip(&self.attn_vec).map(|(h, v)| h * v).sum::<f64>());
            hidden.push(h);
        }
        let alpha = softmax(&scores);
        let readout_dots: Vec<f64> = chunks.iter().map(|u| u.dot(&self.readout)).collect();
        let logit = alpha
            .iter()
            .zip(&readout_dots)
            .map(|(a, r)| a * r)
            .sum::<f64>()
            + self.readout_bias;
        Ok(Trace {
            hidden,
            alpha,
            readout_dots,
            logit,
            prob: sigmoid(logit),
        })
    }

    /// Mean binary cross-entropy over a batch.
    pub fn loss(&self, batch: &[Example]) -> Result<f64, PredictError> {
        let mut total = 0.0;
        for ex in batch {
            total += bce_with_logit(self.trace(&ex.chunks)?.logit, ex.label as f64);
        }
        Ok(total / batch.len() as f64)
    }

    /// Analytic gradient of the mean batch loss, and the loss itself.
    pub fn gradient(&self, batch: &[Example]) -> Result<(Params, f64), PredictError> {
        let mut g = Params::zeros(self.dim, self.attn);
        let refs: Vec<&Example> = batch.iter().collect();
        let loss = self.accumulate_gradient(&refs, &mut g)?;
        Ok((g, loss))
    }

    /// Adds the mean-loss gradient of `batch` into `g`, which must be zeroed
    /// by the caller. Returns the mean loss.
    pub(crate) fn accumulate_gradient(
        &self,
        batch: &[&Example],
        g: &mut Params,
    ) -> Result<f64, PredictError> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let attn = self.attn;
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut da = vec![0.0; attn];
        for ex in batch {
            let t = self.trace(&ex.chunks)?;
            let y = ex.label as f64;
            loss += bce_with_logit(t.logit, y);
            let dz = (t.prob - y) * scale;
            g.readout_bias += dz;
            let dalpha: Vec<f64> = t.readout_dots.iter().map(|r| dz * r).collect();
            let mean_dalpha: f64 = t.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            for (i, u) in ex.chunks.iter().enumerate() {
                let alpha = t.alpha[i];
                for (j, x) in u.iter() {
                    g.readout[j] += dz * alpha * x;
                }
                let ds = alpha * (dalpha[i] - mean_dalpha);
                if ds == 0.0 {
                    continue;
                }
                let h = &t.hidden[i];
                for a in 0..attn {
                    g.attn_vec[a] += ds * h[a];
                    da[a] = ds * self.attn_vec[a] * (1.0 - h[a] * h[a]);
                    g.attn_bias[a] += da[a];
                }
                for (j, x) in u.iter() {
                    let col = &mut g.proj[j * attn..(j + 1) * attn];
                    for (acc, d) in col.iter_mut().zip(&da) {
                        *acc += d * x;
                    }
                }
            }
        }
        Ok(loss * scale)
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Attention weights and the pooled dense vector for a list of chunks.
pub fn attention_pool(
    chunks: &[SparseVec],
    params: &Params,
) -> Result<(Vec<f64>, Vec<f64>), PredictError> {
    let t = params.trace(chunks)?;
    let mut pooled = vec![0.0; params.dim];
    for (u, a) in chunks.iter().zip(&t.alpha) {
        for (j, x) in u.iter() {
            pooled[j] += a * x;
        }
    }
    Ok((pooled, t.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub encoder: EncoderConfig,
    pub params: Params,
    /// Pipeline the model was trained with; the default at prediction time.
    pub pipeline: PipelineConfig,
    pub train_meta: TrainMeta,
}

impl PredictorModel {
    /// The built-in encoder matching this model's config.
    pub fn builtin_encoder(&self) -> Result<HashedNgramEncoder, PredictError> {
        match self.encoder.kind {
            EncoderKind::HashedNgram => Ok(HashedNgramEncoder::new(self.encoder)?),
            EncoderKind::External => Err(EncoderError::ExternalEncoderRequired.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub label: u8,
    pub probability: f64,
    pub attention: Vec<f64>,
    pub input_selection: InputSelection,
    pub technique: Technique,
    /// Document sentence indices that reached the model.
    pub used_sentences: Vec<usize>,
    pub fallback_used: bool,
}

/// Chunks and encodes the tokens of a view.
pub fn encode_view(
    view: &DocView<'_>,
    chunking: &ChunkingConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<Vec<SparseVec>, PredictError> {
    let tokens = view.tokens();
    let spans = chunk(&tokens, chunking)?;
    spans
        .iter()
        .map(|c| encoder.encode(c.slice(&tokens)).map_err(PredictError::from))
        .collect()
}

/// Probability and attention for an already resolved view.
pub fn predict_view(
    view: &DocView<'_>,
    params: &Params,
    chunking: &ChunkingConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<(f64, Vec<f64>), PredictError> {
    if encoder.dim() != params.dim {
        return Err(PredictError::DimensionMismatch(format!(
            "encoder dimension {} but model dimension {}",
            encoder.dim(),
            params.dim
        )));
    }
    let t = params.trace(&encode_view(view, chunking, encoder)?)?;
    Ok((t.prob, t.alpha))
}

/// Full prediction for a document whose sentences carry roles.
pub fn forward(
    doc: &Document,
    model: &PredictorModel,
    cfg: &PipelineConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<PredictionResult, PredictError> {
    let resolved = resolve_input(doc, cfg)?;
    result_for(&resolved.view, resolved.fallback_used, model, cfg, encoder)
}

pub(crate) fn result_for(
    view: &DocView<'_>,
    fallback_used: bool,
    model: &PredictorModel,
    cfg: &PipelineConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<PredictionResult, PredictError> {
    let (probability, attention) = predict_view(view, &model.params, &cfg.chunking, encoder)?;
    Ok(PredictionResult {
        label: u8::from(probability >= 0.5),
        probability,
        attention,
        input_selection: cfg.input_selection,
        technique: cfg.chunking.technique,
        used_sentences: view.indices().to_vec(),
        fallback_used,
    })
}
