//! Small deterministic models for tests, recorded fixtures and demos.

use std::sync::{Arc, OnceLock};

use factlex_core::chunker::{ChunkingConfig, Technique};
use factlex_core::encoder::{EncoderConfig, HashedNgramEncoder};
use factlex_core::harness::{planted_train_config, synthetic};
use factlex_core::pipeline::{InputSelection, PipelineConfig};
use factlex_core::predictor::{train, PredictorModel, TrainConfig};
use factlex_core::roles::TaggerModel;
use factlex_core::summarizer::RoleWeightScheme;
use factlex_core::{Document, RhetoricalRole, Split};

use crate::{AppState, DEFAULT_BODY_LIMIT};

/// Tags as Fact then Issue under [`fixture_tagger`].
pub const TWO_SENTENCE_TEXT: &str =
    "The appellant filed a complaint. The question is whether the sale was valid.";

/// Tags as RatioOfDecision then Fact; variation 1 keeps sentence 1, variation 2
/// sentence 0 under a five-word budget.
pub const SCHEME_CONTRAST_TEXT: &str = "It was held so. The appellant filed.";

pub const FIXTURE_CORPUS_SIZE: usize = 200;
pub const FIXTURE_CORPUS_SEED: u64 = 7;
pub const FIXTURE_ENCODER_DIM: usize = 1024;
pub const FIXTURE_ATTENTION_DIM: usize = 8;
pub const FIXTURE_EPOCHS: usize = 30;

/// Emission weight 1.0 from `cue_{R}` to role R, 0.1 from `bias` to Fact,
/// all transitions zero.
pub fn fixture_tagger() -> TaggerModel {
    let mut model = TaggerModel::default();
    for role in RhetoricalRole::ALL {
        if role != RhetoricalRole::None {
            model.set_emission(&format!("cue_{role}"), role, 1.0);
        }
    }
    model.set_emission("bias", RhetoricalRole::Fact, 0.1);
    model
}

/// Annotated planted corpus the fixture predictor is trained on.
pub fn fixture_corpus() -> Vec<Document> {
    synthetic::generate_planted_corpus(FIXTURE_CORPUS_SIZE, FIXTURE_CORPUS_SEED)
        .expect("fixture corpus size is valid")
        .annotated()
}

/// Facts-only, sliding-window predictor trained on [`fixture_corpus`].
/// Trained once per process.
pub fn fixture_predictor() -> &'static PredictorModel {
    static MODEL: OnceLock<PredictorModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = TrainConfig {
            epochs: FIXTURE_EPOCHS,
            attention_dim: FIXTURE_ATTENTION_DIM,
            encoder: EncoderConfig {
                dim: FIXTURE_ENCODER_DIM,
                ..EncoderConfig::default()
            },
            ..planted_train_config(0)
        };
        let encoder = HashedNgramEncoder::new(cfg.encoder).expect("fixture encoder config");
        let pipeline = PipelineConfig::new(
            InputSelection::FactsOnly,
            ChunkingConfig::for_technique(Technique::SlidingWindow),
        );
        train(&fixture_corpus(), &pipeline, &cfg, &encoder)
            .expect("fixture training succeeds")
            .0
    })
}

pub fn fixture_state() -> Arc<AppState> {
    Arc::new(
        AppState::new(
            fixture_tagger(),
            fixture_predictor().clone(),
            RoleWeightScheme::variation1(),
            DEFAULT_BODY_LIMIT,
        )
        .expect("fixture state"),
    )
}

/// A test-split planted document: its text, the index of the planted cue
/// sentence and its gold label.
pub fn planted_example() -> (String, usize, u8) {
    let doc = fixture_corpus()
        .into_iter()
        .find(|d| d.split == Split::Test)
        .expect("fixture corpus has a test split");
    let planted = doc.meta[synthetic::META_PLANTED]
        .parse()
        .expect("planted index is numeric");
    (doc.text(), planted, doc.label.expect("planted documents are labelled"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use factlex_core::corpus::parse_document;
    use factlex_core::roles::tag;

    #[test]
    fn two_sentence_path_is_fact_then_issue() {
        let doc = parse_document(TWO_SENTENCE_TEXT, "d").unwrap();
        let roles = tag(&doc, &fixture_tagger()).unwrap();
        assert_eq!(roles.roles, [RhetoricalRole::Fact, RhetoricalRole::Issue]);
        // Sentence 0 fires cue_Fact and bias: best 1.1 vs 0 for every other role.
        assert!((roles.scores[0] - 1.1).abs() < 1e-12);
        // Sentence 1 fires cue_Issue and bias: Issue 1.0 vs Fact 0.1.
        assert!((roles.scores[1] - 0.9).abs() < 1e-12);
        let doc = parse_document(SCHEME_CONTRAST_TEXT, "d").unwrap();
        let roles = tag(&doc, &fixture_tagger()).unwrap();
        assert_eq!(roles.roles, [RhetoricalRole::RatioOfDecision, RhetoricalRole::Fact]);
    }

    #[test]
    fn planted_example_round_trips_through_parsing() {
        let (text, planted, _) = planted_example();
        let doc = parse_document(&text, "d").unwrap();
        assert!(doc.sentences[planted].tokens.iter().any(|t| t.contains("marker")));
    }
}
