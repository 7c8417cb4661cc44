//! Mini-batch SGD with momentum, dev-set model selection and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PredictError, PredictorModel, Params, TrainMeta, DEFAULT_ATTENTION_DIM};
use crate::corpus::{Document, Split};
use crate::encoder::{ChunkEncoder, EncoderConfig, SparseVec};
use crate::harness::metrics::evaluate;
use crate::pipeline::{resolve_input, PipelineConfig, PipelineError};

/// One encoded document.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub chunks: Vec<SparseVec>,
    pub label: u8,
}

fn d_lr() -> f64 {
    0.1
}
fn d_momentum() -> f64 {
    0.9
}
fn d_epochs() -> usize {
    30
}
fn d_batch() -> usize {
    16
}
fn d_patience() -> usize {
    5
}
fn d_attn() -> usize {
    DEFAULT_ATTENTION_DIM
}
fn d_init_scale() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Zero disables early stopping.
    #[serde(default = "d_patience")]
    pub early_stop_patience: usize,
    #[serde(default = "d_attn")]
    pub attention_dim: usize,
    #[serde(default = "d_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: d_lr(),
            momentum: d_momentum(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            seed: 0,
            early_stop_patience: d_patience(),
            attention_dim: d_attn(),
            init_scale: d_init_scale(),
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        let bad = |msg: String| Err(PredictError::InvalidConfig(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 || self.attention_dim == 0 {
            return bad("batch_size and attention_dim must be positive".into());
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad(format!("init_scale must be positive, got {}", self.init_scale));
        }
        self.encoder.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss at initialization.
    pub initial_loss: f64,
    /// Mean training loss after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Dev macro-F1 after each epoch; empty without a dev split.
    pub dev_f1: Vec<f64>,
    /// 1-based epoch whose parameters were kept; 0 means the last epoch was
    /// kept because there was no dev split.
    pub best_epoch: usize,
    pub skipped_documents: Vec<String>,
}

/// Encodes the labelled documents of one split. Documents whose selection
/// resolves to nothing are skipped and reported.
pub fn build_examples<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    pipeline: &PipelineConfig,
    encoder: &dyn ChunkEncoder,
    skipped: &mut Vec<String>,
) -> Result<Vec<Example>, PredictError> {
    let mut out = Vec::new();
    for doc in docs {
        let label = doc.label.ok_or_else(|| PredictError::MissingLabel(doc.id.clone()))?;
        let resolved = match resolve_input(doc, pipeline) {
            Ok(r) => r,
            Err(PipelineError::EmptyInput(_)) => {
                log::warn!("document {}: empty input, skipped", doc.id);
                skipped.push(doc.id.clone());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        out.push(Example {
            chunks: super::encode_view(&resolved.view, &pipeline.chunking, encoder)?,
            label,
        });
    }
    Ok(out)
}

fn predict_labels(params: &Params, examples: &[Example]) -> Result<Vec<u8>, PredictError> {
    examples
        .iter()
        .map(|ex| Ok(u8::from(params.trace(&ex.chunks)?.prob >= 0.5)))
        .collect()
}

/// Macro-F1 of `params` on encoded examples.
pub fn macro_f1(params: &Params, examples: &[Example]) -> Result<f64, PredictError> {
    let preds = predict_labels(params, examples)?;
    let golds: Vec<u8> = examples.iter().map(|e| e.label).collect();
    Ok(evaluate(&preds, &golds)
        .map_err(|e| PredictError::InvalidConfig(e.to_string()))?
        .f1)
}

/// Trains on pre-encoded examples.
pub fn train_examples(
    train: &[Example],
    dev: &[Example],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<(Params, TrainReport), PredictError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(PredictError::EmptySplit("train"));
    }
    if dev.is_empty() && cfg.early_stop_patience > 0 {
        return Err(PredictError::EmptySplit("dev"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::random(dim, cfg.attention_dim, cfg.init_scale, &mut rng);
    let mut velocity = Params::zeros(dim, cfg.attention_dim);
    let mut grad = Params::zeros(dim, cfg.attention_dim);
    let mut report = TrainReport {
        initial_loss: params.loss(train)?,
        epoch_loss: Vec::new(),
        dev_f1: Vec::new(),
        best_epoch: 0,
        skipped_documents: Vec::new(),
    };
    // (dev F1, dev loss, parameters); ties on F1 go to the lower loss.
    let mut best: Option<(f64, f64, Params)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for ids in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(ids.iter().map(|&i| &train[i]));
            grad.tensors_mut().iter_mut().for_each(|t| t.fill(0.0));
            params.accumulate_gradient(&batch, &mut grad)?;
            for ((p, v), g) in params
                .tensors_mut()
                .into_iter()
                .zip(velocity.tensors_mut())
                .zip(grad.tensors())
            {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = cfg.momentum * *v - cfg.learning_rate * g;
                    *p += *v;
                }
            }
        }
        report.epoch_loss.push(params.loss(train)?);
        if dev.is_empty() {
            continue;
        }
        let f1 = macro_f1(&params, dev)?;
        let dev_loss = params.loss(dev)?;
        report.dev_f1.push(f1);
        log::debug!("epoch {epoch}: loss {:.6} dev f1 {f1:.4}", report.epoch_loss[epoch - 1]);
        let improved = best
            .as_ref()
            .is_none_or(|(b, l, _)| f1 > *b || (f1 == *b && dev_loss < *l));
        if improved {
            best = Some((f1, dev_loss, params.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }
    if !params.is_finite() {
        return Err(PredictError::InvalidConfig(
            "training diverged to non-finite parameters; lower the learning rate".into(),
        ));
    }
    Ok((best.map(|(_, _, p)| p).unwrap_or(params), report))
}

/// Trains a model on the `train` split of `corpus`, selecting on `dev`.
pub fn train(
    corpus: &[Document],
    pipeline: &PipelineConfig,
    cfg: &TrainConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<(PredictorModel, TrainReport), PredictError> {
    cfg.validate()?;
    pipeline.chunking.validate()?;
    let mut skipped = Vec::new();
    let of = |split: Split| corpus.iter().filter(move |d| d.split == split);
    let train_ex = build_examples(of(Split::Train), pipeline, encoder, &mut skipped)?;
    let dev_ex = build_examples(of(Split::Dev), pipeline, encoder, &mut skipped)?;
    let (params, mut report) = train_examples(&train_ex, &dev_ex, encoder.dim(), cfg)?;
    report.skipped_documents = skipped;
    let model = PredictorModel {
        encoder: cfg.encoder,
        params,
        pipeline: pipeline.clone(),
        train_meta: TrainMeta {
            seed: cfg.seed,
            epochs: report.epoch_loss.len(),
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
        },
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Linearly separable toy data: coordinate 0 or 1 carries the label.
    fn toy(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut dense = vec![0.0; 16];
                dense[label as usize] = 1.0;
                for x in dense.iter_mut().skip(2) {
                    *x = rng.random_range(0.0..0.5);
                }
                Example {
                    chunks: vec![SparseVec::from_dense(&dense)],
                    label,
                }
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            attention_dim: 4,
            epochs: 20,
            encoder: EncoderConfig {
                dim: 16,
                ..EncoderConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_separable_data_deterministically() {
        let (train, dev) = (toy(40, 1), toy(20, 2));
        let (p1, r1) = train_examples(&train, &dev, 16, &cfg()).unwrap();
        let (p2, r2) = train_examples(&train, &dev, 16, &cfg()).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
        assert_eq!(r1.dev_f1.iter().copied().fold(0.0, f64::max), 1.0);
        assert!(r1.epoch_loss[0] < r1.initial_loss);
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let c = TrainConfig {
            learning_rate: 0.0,
            ..cfg()
        };
        let (p, _) = train_examples(&toy(10, 1), &toy(4, 2), 16, &c).unwrap();
        let init = Params::random(16, 4, 0.05, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p, init);
    }

    #[test]
    fn split_requirements() {
        assert!(matches!(
            train_examples(&[], &toy(4, 2), 16, &cfg()),
            Err(PredictError::EmptySplit("train"))
        ));
        assert!(matches!(
            train_examples(&toy(4, 1), &[], 16, &cfg()),
            Err(PredictError::EmptySplit("dev"))
        ));
        let no_stop = TrainConfig {
            early_stop_patience: 0,
            ..cfg()
        };
        let (_, r) = train_examples(&toy(4, 1), &[], 16, &no_stop).unwrap();
        assert_eq!(r.epoch_loss.len(), 20);
        assert_eq!(r.best_epoch, 0);
    }

    #[test]
    fn early_stopping_bounds_epochs() {
        let c = TrainConfig {
            epochs: 100,
            early_stop_patience: 2,
            ..cfg()
        };
        let (_, r) = train_examples(&toy(40, 1), &toy(20, 2), 16, &c).unwrap();
        assert!(r.epoch_loss.len() <= r.best_epoch + 2);
    }
}
