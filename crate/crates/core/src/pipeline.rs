//! Input selection: which sentences of a document reach the classifier.
//!
//! Every selection starts from the document with present-court ruling
//! sentences removed, so the verdict text never leaks into the input.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::ChunkingConfig;
use crate::corpus::{DocView, Document, RhetoricalRole};
use crate::summarizer::{summarize_view, RoleWeightScheme, SummaryError, SummarySpec};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("input selection {0} resolved to no sentences")]
    EmptyInput(InputSelection),
    #[error("excluded sentence index {index} out of range for {sentences} sentences")]
    InvalidExclusion { index: usize, sentences: usize },
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputSelection {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "var1")]
    Var1,
    #[serde(rename = "var2")]
    Var2,
    #[serde(rename = "factsOnly")]
    FactsOnly,
    #[serde(rename = "factsRLC")]
    FactsRlc,
}

impl InputSelection {
    pub const ALL: [InputSelection; 5] = [
        InputSelection::FactsOnly,
        InputSelection::FactsRlc,
        InputSelection::Var1,
        InputSelection::Var2,
        InputSelection::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputSelection::Full => "full",
            InputSelection::Var1 => "var1",
            InputSelection::Var2 => "var2",
            InputSelection::FactsOnly => "factsOnly",
            InputSelection::FactsRlc => "factsRLC",
        }
    }
}

impl std::fmt::Display for InputSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InputSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|sel| sel.as_str() == s)
            .ok_or_else(|| format!("unknown input selection {s:?}"))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_selection: InputSelection,
    #[serde(default)]
    pub chunking: ChunkingConfig,
    /// Budget, quotas and lambda for summary-based selections. Its scheme is
    /// replaced by the selection's own scheme unless `scheme` is set.
    #[serde(default)]
    pub summary: SummarySpec,
    /// Overrides the scheme of `var1`/`var2` and of fallback summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<RoleWeightScheme>,
    /// Summarize the fact (or fact + lower-court) sentences again instead of
    /// passing them through raw.
    #[serde(default)]
    pub summarize_facts: bool,
    /// When a fact-based selection is empty, fall back to a variation-1
    /// summary of the whole document.
    #[serde(default = "default_true")]
    pub facts_fallback: bool,
}

impl PipelineConfig {
    pub fn new(input_selection: InputSelection, chunking: ChunkingConfig) -> Self {
        Self {
            input_selection,
            chunking,
            summary: SummarySpec::default(),
            scheme: None,
            summarize_facts: false,
            facts_fallback: true,
        }
    }

    fn spec_with(&self, default: RoleWeightScheme) -> SummarySpec {
        SummarySpec {
            scheme: self.scheme.clone().unwrap_or(default),
            ..self.summary.clone()
        }
    }
}

/// The sentences chosen for one document, with document-relative indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedInput<'a> {
    pub view: DocView<'a>,
    pub fallback_used: bool,
}

fn summarized<'a>(view: &DocView<'a>, spec: &SummarySpec) -> Result<DocView<'a>, PipelineError> {
    let summary = summarize_view(view, spec)?;
    Ok(view.restrict_to(&summary.selected))
}

/// Resolves the input selection using the roles stored on the sentences.
pub fn resolve_input<'a>(
    doc: &'a Document,
    cfg: &PipelineConfig,
) -> Result<ResolvedInput<'a>, PipelineError> {
    resolve_input_excluding(doc, cfg, &HashSet::new())
}

/// As [`resolve_input`], with `excluded` sentences removed before selection.
pub fn resolve_input_excluding<'a>(
    doc: &'a Document,
    cfg: &PipelineConfig,
    excluded: &HashSet<usize>,
) -> Result<ResolvedInput<'a>, PipelineError> {
    let sentences = doc.sentences.len();
    if let Some(&index) = excluded.iter().filter(|&&i| i >= sentences).min() {
        return Err(PipelineError::InvalidExclusion { index, sentences });
    }
    let base = DocView::full(doc).retain(|s| {
        !excluded.contains(&s.index) && s.role_or_none() != RhetoricalRole::RulingByPresentCourt
    });
    let facts = |keep_rlc: bool| -> Result<DocView<'a>, PipelineError> {
        let view = base.retain(|s| match s.role_or_none() {
            RhetoricalRole::Fact => true,
            RhetoricalRole::RulingByLowerCourt => keep_rlc,
            _ => false,
        });
        if cfg.summarize_facts && !view.is_empty() {
            summarized(&view, &cfg.spec_with(RoleWeightScheme::variation1()))
        } else {
            Ok(view)
        }
    };
    let view = match cfg.input_selection {
        InputSelection::Full => base.clone(),
        InputSelection::Var1 => summarized(&base, &cfg.spec_with(RoleWeightScheme::variation1()))?,
        InputSelection::Var2 => summarized(&base, &cfg.spec_with(RoleWeightScheme::variation2()))?,
        InputSelection::FactsOnly => facts(false)?,
        InputSelection::FactsRlc => facts(true)?,
    };
    let fact_based = matches!(
        cfg.input_selection,
        InputSelection::FactsOnly | InputSelection::FactsRlc
    );
    if view.is_empty() && fact_based && cfg.facts_fallback && !base.is_empty() {
        log::warn!(
            "document {}: {} selection is empty, falling back to a variation-1 summary",
            doc.id,
            cfg.input_selection
        );
        let view = summarized(&base, &cfg.spec_with(RoleWeightScheme::variation1()))?;
        if !view.is_empty() {
            return Ok(ResolvedInput {
                view,
                fallback_used: true,
            });
        }
    }
    if view.is_empty() {
        return Err(PipelineError::EmptyInput(cfg.input_selection));
    }
    Ok(ResolvedInput {
        view,
        fallback_used: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_document;
    use crate::roles::RoleSequence;
    use RhetoricalRole::*;

    fn doc(roles: &[RhetoricalRole]) -> Document {
        let text: Vec<String> = (0..roles.len())
            .map(|i| format!("Sentence number {i} says the appellant filed papers."))
            .collect();
        parse_document(&text.join(" "), "d")
            .unwrap()
            .with_roles(&RoleSequence::new("d", roles.to_vec()))
    }

    fn cfg(sel: InputSelection) -> PipelineConfig {
        PipelineConfig::new(sel, ChunkingConfig::default())
    }

    #[test]
    fn selections_never_include_present_court_ruling() {
        let d = doc(&[Fact, RulingByLowerCourt, Issue, RatioOfDecision, RulingByPresentCourt]);
        for sel in InputSelection::ALL {
            let r = resolve_input(&d, &cfg(sel)).unwrap();
            assert!(!r.view.contains(4), "{sel}");
        }
        assert_eq!(resolve_input(&d, &cfg(InputSelection::Full)).unwrap().view.indices(), [0, 1, 2, 3]);
        assert_eq!(resolve_input(&d, &cfg(InputSelection::FactsOnly)).unwrap().view.indices(), [0]);
        assert_eq!(resolve_input(&d, &cfg(InputSelection::FactsRlc)).unwrap().view.indices(), [0, 1]);
    }

    #[test]
    fn empty_facts_fall_back_or_fail() {
        let d = doc(&[Issue, Argument, RatioOfDecision, RulingByPresentCourt]);
        let r = resolve_input(&d, &cfg(InputSelection::FactsOnly)).unwrap();
        assert!(r.fallback_used);
        assert!(!r.view.is_empty());
        let mut strict = cfg(InputSelection::FactsOnly);
        strict.facts_fallback = false;
        assert_eq!(
            resolve_input(&d, &strict),
            Err(PipelineError::EmptyInput(InputSelection::FactsOnly))
        );
    }

    #[test]
    fn exclusion_removes_before_selection() {
        let d = doc(&[Fact, Fact, Issue]);
        let excluded: HashSet<usize> = [0].into();
        let r = resolve_input_excluding(&d, &cfg(InputSelection::FactsOnly), &excluded).unwrap();
        assert_eq!(r.view.indices(), [1]);
        let all: HashSet<usize> = [0, 1, 2].into();
        assert!(matches!(
            resolve_input_excluding(&d, &cfg(InputSelection::Full), &all),
            Err(PipelineError::EmptyInput(_))
        ));
        let bad: HashSet<usize> = [7].into();
        assert!(matches!(
            resolve_input_excluding(&d, &cfg(InputSelection::Full), &bad),
            Err(PipelineError::InvalidExclusion { index: 7, .. })
        ));
    }

    #[test]
    fn config_json() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"input_selection": "factsRLC", "chunking": {"technique": "first"}}"#)
                .unwrap();
        assert_eq!(c.input_selection, InputSelection::FactsRlc);
        assert!(c.facts_fallback);
        assert!(!c.summarize_facts);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"input_selection": "facts"}"#).is_err());
    }
}
