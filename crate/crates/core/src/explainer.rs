//! Sentence importance by occlusion.
//!
//! Each sentence of the resolved input is removed in turn, the remainder is
//! re-chunked and re-scored, and the sentence's delta is the change in
//! probability, signed so that a positive delta means the sentence supports
//! the predicted class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::encoder::ChunkEncoder;
use crate::pipeline::{resolve_input, PipelineConfig};
use crate::predictor::{predict_view, PredictError, PredictorModel};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("explanation needs at least two input sentences, got {0}")]
    TooFewSentences(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationItem {
    pub sentence: usize,
    pub delta: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub base_p: f64,
    /// Predicted label; deltas are signed toward it.
    pub label: u8,
    pub k: usize,
    pub items: Vec<ExplanationItem>,
}

/// Signed occlusion deltas for every sentence of the resolved input, in
/// input order.
pub fn occlusion_deltas(
    doc: &Document,
    model: &PredictorModel,
    cfg: &PipelineConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<(f64, Vec<(usize, f64)>), ExplainError> {
    let view = resolve_input(doc, cfg).map_err(PredictError::from)?.view;
    if view.len() < 2 {
        return Err(ExplainError::TooFewSentences(view.len()));
    }
    let (base_p, _) = predict_view(&view, &model.params, &cfg.chunking, encoder)?;
    let sign = if base_p >= 0.5 { 1.0 } else { -1.0 };
    let deltas = view
        .indices()
        .par_iter()
        .map(|&i| {
            let (p, _) = predict_view(&view.without(i), &model.params, &cfg.chunking, encoder)?;
            // Adding 0.0 turns a signed zero into +0.0.
            Ok((i, sign * (base_p - p) + 0.0))
        })
        .collect::<Result<Vec<_>, PredictError>>()?;
    Ok((base_p, deltas))
}

/// Top-`k` sentences by |delta|, ties broken by lower sentence index.
pub fn explain(
    doc: &Document,
    model: &PredictorModel,
    cfg: &PipelineConfig,
    k: usize,
    encoder: &dyn ChunkEncoder,
) -> Result<Explanation, ExplainError> {
    if k == 0 {
        return Err(ExplainError::InvalidK);
    }
    let (base_p, mut deltas) = occlusion_deltas(doc, model, cfg, encoder)?;
    deltas.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    deltas.truncate(k);
    Ok(Explanation {
        base_p,
        label: u8::from(base_p >= 0.5),
        k,
        items: deltas
            .into_iter()
            .map(|(sentence, delta)| ExplanationItem {
                sentence,
                delta,
                text: doc.sentences[sentence].text.clone(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::ChunkingConfig;
    use crate::corpus::{parse_document, RhetoricalRole};
    use crate::encoder::{EncoderConfig, HashedNgramEncoder};
    use crate::pipeline::InputSelection;
    use crate::predictor::{Params, TrainMeta};
    use crate::roles::RoleSequence;
    use RhetoricalRole::*;

    fn setup(readout: impl Fn(&HashedNgramEncoder) -> Vec<f64>) -> (Document, PredictorModel, HashedNgramEncoder) {
        let enc_cfg = EncoderConfig {
            dim: 256,
            ngram_max: 1,
            ..EncoderConfig::default()
        };
        let enc = HashedNgramEncoder::new(enc_cfg).unwrap();
        let doc = parse_document(
            "The appellant filed a suit. The key word is decisive here. Counsel argued otherwise. The appeal is allowed.",
            "d",
        )
        .unwrap()
        .with_roles(&RoleSequence::new("d", vec![Fact, Fact, Argument, RulingByPresentCourt]));
        let mut params = Params::zeros(256, 4);
        params.readout = readout(&enc);
        let model = PredictorModel {
            encoder: enc_cfg,
            params,
            pipeline: PipelineConfig::new(InputSelection::Full, ChunkingConfig::default()),
            train_meta: TrainMeta { seed: 0, epochs: 0, learning_rate: 0.1, momentum: 0.9 },
        };
        (doc, model, enc)
    }

    #[test]
    fn constant_model_gives_zero_deltas() {
        let (doc, model, enc) = setup(|_| vec![0.0; 256]);
        let e = explain(&doc, &model, &model.pipeline, 10, &enc).unwrap();
        assert_eq!(e.items.len(), 3, "k clamps to the input size");
        assert!(e.items.iter().all(|i| i.delta == 0.0 && i.delta.is_sign_positive()));
        assert_eq!(e.items.iter().map(|i| i.sentence).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn cue_sentence_ranks_first() {
        let (doc, model, enc) = setup(|enc| {
            let mut w = vec![0.0; 256];
            w[enc.bucket("decisive")] = 5.0;
            w
        });
        let e = explain(&doc, &model, &model.pipeline, 2, &enc).unwrap();
        assert_eq!(e.label, 1);
        assert_eq!(e.items[0].sentence, 1);
        assert!(e.items[0].delta > 0.0);
        assert_eq!(e.items.len(), 2);
        assert_eq!(explain(&doc, &model, &model.pipeline, 2, &enc).unwrap(), e);
    }

    #[test]
    fn errors() {
        let (doc, model, enc) = setup(|_| vec![0.0; 256]);
        assert!(matches!(
            explain(&doc, &model, &model.pipeline, 0, &enc),
            Err(ExplainError::InvalidK)
        ));
        let facts = PipelineConfig::new(InputSelection::FactsOnly, ChunkingConfig::default());
        let one = doc.without_sentences(&[0].into());
        assert!(matches!(
            explain(&one, &model, &facts, 3, &enc),
            Err(ExplainError::TooFewSentences(1))
        ));
    }
}
