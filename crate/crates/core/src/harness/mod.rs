//! Experiment harness: metrics, the planted-signal corpus, the
//! input-selection × technique grid and report tables.

pub mod metrics;
pub mod report;
pub mod synthetic;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chunker::{ChunkingConfig, Technique};
use crate::corpus::{Document, Split};
use crate::encoder::ChunkEncoder;
use crate::pipeline::{InputSelection, PipelineConfig};
use crate::predictor::{forward, train, PredictError, TrainConfig};
use crate::summarizer::SummarySpec;
use metrics::{evaluate, Metrics, MetricsError};

pub const DEFAULT_MODEL_NAME: &str = "hashed-ngram-attention";

/// Learning rate of [`planted_train_config`].
pub const PLANTED_LEARNING_RATE: f64 = 1.0;

/// Training settings for planted-signal grids: the predictor defaults with
/// [`PLANTED_LEARNING_RATE`].
pub fn planted_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: PLANTED_LEARNING_RATE,
        seed,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("cell {selection}/technique {technique}: {source}")]
    Cell {
        selection: InputSelection,
        technique: u8,
        #[source]
        source: PredictError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

mod technique_numbers {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Technique], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|t| t.number()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Technique>, D::Error> {
        Vec::<u8>::deserialize(d)?
            .into_iter()
            .map(|n| {
                Technique::from_number(n)
                    .ok_or_else(|| serde::de::Error::custom(format!("technique must be 1, 2 or 3, got {n}")))
            })
            .collect()
    }
}

fn default_model_name() -> String {
    DEFAULT_MODEL_NAME.into()
}
fn default_selections() -> Vec<InputSelection> {
    InputSelection::ALL.to_vec()
}
fn default_techniques() -> Vec<Technique> {
    Technique::ALL.to_vec()
}
fn default_true() -> bool {
    true
}

/// Grid definition. Cells run selection-major, in the listed orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_model_name")]
    pub model: String,
    #[serde(default = "default_selections")]
    pub selections: Vec<InputSelection>,
    #[serde(default = "default_techniques", with = "technique_numbers")]
    pub techniques: Vec<Technique>,
    /// Window, overlap and k shared by all cells; the technique field is
    /// replaced per cell.
    #[serde(default)]
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub summary: SummarySpec,
    #[serde(default)]
    pub summarize_facts: bool,
    #[serde(default = "default_true")]
    pub facts_fallback: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            model: default_model_name(),
            selections: default_selections(),
            techniques: default_techniques(),
            chunking: ChunkingConfig::default(),
            summary: SummarySpec::default(),
            summarize_facts: false,
            facts_fallback: true,
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> Vec<PipelineConfig> {
        let mut out = Vec::new();
        for &selection in &self.selections {
            for &technique in &self.techniques {
                out.push(PipelineConfig {
                    input_selection: selection,
                    chunking: ChunkingConfig {
                        technique,
                        ..self.chunking
                    },
                    summary: self.summary.clone(),
                    scheme: None,
                    summarize_facts: self.summarize_facts,
                    facts_fallback: self.facts_fallback,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub model: String,
    pub input_selection: InputSelection,
    #[serde(with = "technique_number")]
    pub technique: Technique,
    pub metrics: Metrics,
    pub runtime_s: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
}

mod technique_number {
    use super::*;

    pub fn serialize<S: Serializer>(t: &Technique, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(t.number())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Technique, D::Error> {
        let n = u8::deserialize(d)?;
        Technique::from_number(n)
            .ok_or_else(|| serde::de::Error::custom(format!("technique must be 1, 2 or 3, got {n}")))
    }
}

impl ExperimentRow {
    /// The row without its wall-clock runtime; reruns agree on this exactly.
    pub fn deterministic_part(&self) -> ExperimentRow {
        ExperimentRow {
            runtime_s: 0.0,
            ..self.clone()
        }
    }
}

/// Test-split predictions of an already trained configuration.
pub fn evaluate_split(
    corpus: &[Document],
    split: Split,
    model: &crate::predictor::PredictorModel,
    cfg: &PipelineConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<Metrics, PredictError> {
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for doc in corpus.iter().filter(|d| d.split == split) {
        let gold = doc.label.ok_or_else(|| PredictError::MissingLabel(doc.id.clone()))?;
        preds.push(forward(doc, model, cfg, encoder)?.label);
        golds.push(gold);
    }
    evaluate(&preds, &golds).map_err(|e| PredictError::InvalidConfig(e.to_string()))
}

/// Trains and evaluates every grid cell. `corpus` must carry sentence roles
/// and train/dev/test splits. Cells run in parallel; rows come back in cell
/// order and, apart from runtime, do not depend on scheduling.
pub fn run_grid(
    corpus: &[Document],
    spec: &GridSpec,
    train_cfg: &TrainConfig,
    encoder: &dyn ChunkEncoder,
) -> Result<Vec<ExperimentRow>, HarnessError> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    for (split, name) in [(Split::Train, "train"), (Split::Dev, "dev"), (Split::Test, "test")] {
        if !corpus.iter().any(|d| d.split == split) {
            return Err(HarnessError::EmptySplit(name));
        }
    }
    cells
        .par_iter()
        .map(|cfg| {
            let started = Instant::now();
            let wrap = |source| HarnessError::Cell {
                selection: cfg.input_selection,
                technique: cfg.chunking.technique.number(),
                source,
            };
            let (model, report) = train(corpus, cfg, train_cfg, encoder).map_err(wrap)?;
            let metrics = evaluate_split(corpus, Split::Test, &model, cfg, encoder).map_err(wrap)?;
            Ok(ExperimentRow {
                model: spec.model.clone(),
                input_selection: cfg.input_selection,
                technique: cfg.chunking.technique,
                metrics,
                runtime_s: started.elapsed().as_secs_f64(),
                epochs_run: report.epoch_loss.len(),
                best_epoch: report.best_epoch,
                best_dev_f1: report.dev_f1.iter().copied().reduce(f64::max),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, HashedNgramEncoder};

    #[test]
    fn grid_spec_json_and_cell_order() {
        let spec: GridSpec = serde_json::from_str(
            r#"{"selections": ["var2", "factsOnly"], "techniques": [3, 1]}"#,
        )
        .unwrap();
        let cells: Vec<_> = spec
            .cells()
            .iter()
            .map(|c| (c.input_selection, c.chunking.technique.number()))
            .collect();
        assert_eq!(
            cells,
            [
                (InputSelection::Var2, 3),
                (InputSelection::Var2, 1),
                (InputSelection::FactsOnly, 3),
                (InputSelection::FactsOnly, 1)
            ]
        );
        assert!(serde_json::from_str::<GridSpec>(r#"{"techniques": [4]}"#).is_err());
        assert_eq!(GridSpec::default().cells().len(), 15);
    }

    #[test]
    fn single_cell_grid() {
        let corpus = synthetic::generate_planted_corpus(40, 5).unwrap().annotated();
        let spec = GridSpec {
            selections: vec![InputSelection::FactsOnly],
            techniques: vec![Technique::SlidingWindow],
            ..GridSpec::default()
        };
        let cfg = TrainConfig {
            epochs: 5,
            attention_dim: 8,
            encoder: EncoderConfig {
                dim: 512,
                ..EncoderConfig::default()
            },
            ..TrainConfig::default()
        };
        let enc = HashedNgramEncoder::new(cfg.encoder).unwrap();
        let rows = run_grid(&corpus, &spec, &cfg, &enc).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].metrics.support, 8);
        let again = run_grid(&corpus, &spec, &cfg, &enc).unwrap();
        assert_eq!(rows[0].deterministic_part(), again[0].deterministic_part());
        assert!(matches!(
            run_grid(&corpus, &GridSpec { selections: vec![], ..GridSpec::default() }, &cfg, &enc),
            Err(HarnessError::EmptyGrid)
        ));
    }
}
