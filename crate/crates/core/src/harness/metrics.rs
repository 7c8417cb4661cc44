//! Binary confusion counts and macro-averaged precision, recall and F1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no predictions to score")]
    Empty,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Counts from the point of view of each class; index = label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub per_class: [ClassCounts; 2],
}

impl Confusion {
    pub fn total(&self) -> usize {
        let c = self.per_class[1];
        c.tp + c.fp + c.fn_ + c.tn
    }
}

pub fn confusion(preds: &[u8], golds: &[u8]) -> Result<Confusion, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&bad) = preds.iter().chain(golds).find(|&&l| l > 1) {
        return Err(MetricsError::InvalidLabel(bad));
    }
    let mut out = Confusion::default();
    for (class, counts) in out.per_class.iter_mut().enumerate() {
        let class = class as u8;
        for (&p, &g) in preds.iter().zip(golds) {
            match (p == class, g == class) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => counts.tn += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count of the class.
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: [ClassMetrics; 2],
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn class_metrics(c: &ClassCounts) -> ClassMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: c.tp + c.fn_,
    }
}

/// Unweighted mean of per-class metrics over both classes.
pub fn macro_prf(confusion: &Confusion) -> Metrics {
    let per_class = confusion.per_class.map(|c| class_metrics(&c));
    let mean = |f: fn(&ClassMetrics) -> f64| (f(&per_class[0]) + f(&per_class[1])) / 2.0;
    Metrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        per_class,
        support: confusion.total(),
    }
}

pub fn evaluate(preds: &[u8], golds: &[u8]) -> Result<Metrics, MetricsError> {
    Ok(macro_prf(&confusion(preds, golds)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(c.per_class[1], ClassCounts { tp: 2, fp: 0, fn_: 0, tn: 1 });
        let c = confusion(&[1, 1], &[0, 0]).unwrap();
        assert_eq!(c.per_class[1], ClassCounts { tp: 0, fp: 2, fn_: 0, tn: 0 });

        let m = evaluate(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));

        let m = evaluate(&[1, 1, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(m.per_class[1].precision, 0.5);
        assert_eq!(m.per_class[1].recall, 1.0);
        assert!((m.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_class[0].f1, 0.0);
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-15);

        let perfect = evaluate(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            confusion(&[1], &[1, 0]),
            Err(MetricsError::LengthMismatch { preds: 1, golds: 2 })
        );
        assert_eq!(confusion(&[], &[]), Err(MetricsError::Empty));
        assert_eq!(confusion(&[2], &[1]), Err(MetricsError::InvalidLabel(2)));
    }

    proptest! {
        #[test]
        fn swapping_classes_preserves_macro_scores(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..200)
        ) {
            let (p, g): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let flip = |v: &[u8]| v.iter().map(|x| 1 - x).collect::<Vec<_>>();
            let a = evaluate(&p, &g).unwrap();
            let b = evaluate(&flip(&p), &flip(&g)).unwrap();
            prop_assert!((a.precision - b.precision).abs() < 1e-15);
            prop_assert!((a.recall - b.recall).abs() < 1e-15);
            prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        }
    }
}
