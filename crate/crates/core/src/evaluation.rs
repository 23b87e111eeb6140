//! Verdict scoring: confusion counts with Reliable as the positive class,
//! accuracy / precision / recall / F1, and the Human / LLM / Overall table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, Origin};
use crate::detection::Verdict;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("verdict for unknown article {0:?}")]
    UnknownArticle(String),
    #[error("no origin recorded for article {0:?}")]
    MissingOrigin(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Reliable, Label::Reliable) => self.tp += 1,
            (Label::Reliable, Label::Unreliable) => self.fp += 1,
            (Label::Unreliable, Label::Unreliable) => self.tn += 1,
            (Label::Unreliable, Label::Reliable) => self.fn_ += 1,
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Any zero denominator yields 0 for that metric.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    }
}

/// Article ids that produced no verdict, counted apart from the matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Unscored {
    pub article_ids: Vec<String>,
}

/// Confusion counts over `verdicts`. Every verdict must name a labelled article.
pub fn confusion(verdicts: &[Verdict], labels: &HashMap<String, Label>) -> Result<ConfusionMatrix, EvaluationError> {
    let mut cm = ConfusionMatrix::default();
    for v in verdicts {
        let actual = labels
            .get(&v.article_id)
            .ok_or_else(|| EvaluationError::UnknownArticle(v.article_id.clone()))?;
        cm.record(v.prediction, *actual);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subset {
    HumanWritten,
    LlmGenerated,
    Overall,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::HumanWritten, Subset::LlmGenerated, Subset::Overall];

    pub fn display_name(self) -> &'static str {
        match self {
            Subset::HumanWritten => "Human-Written",
            Subset::LlmGenerated => "LLM-Generated",
            Subset::Overall => "Overall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub subset: Subset,
    pub counts: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<SubsetRow>,
    /// Articles in the evaluation set without a verdict.
    pub unscored: Vec<String>,
}

impl MetricsTable {
    pub fn row(&self, subset: Subset) -> &SubsetRow {
        self.rows.iter().find(|r| r.subset == subset).expect("all subsets present")
    }

    /// Subset x metric layout, percentages with two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset,accuracy,precision,recall,f1,tp,fp,tn,fn\n");
        for r in &self.rows {
            let m = r.metrics;
            out.push_str(&format!(
                "{},{:.2},{:.2},{:.2},{:.2},{},{},{},{}\n",
                r.subset.display_name(),
                m.accuracy * 100.0,
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0,
                r.counts.tp,
                r.counts.fp,
                r.counts.tn,
                r.counts.fn_
            ));
        }
        out
    }
}

/// Metrics per origin subset plus Overall, where Overall is computed from the
/// summed confusion cells. `expected_ids` lists every article that should
/// have been scored; those without a verdict are reported as unscored.
pub fn breakdown(
    verdicts: &[Verdict],
    labels: &HashMap<String, Label>,
    origins: &HashMap<String, Origin>,
    expected_ids: &[String],
) -> Result<MetricsTable, EvaluationError> {
    let mut human = Vec::new();
    let mut llm = Vec::new();
    for v in verdicts {
        if !labels.contains_key(&v.article_id) {
            return Err(EvaluationError::UnknownArticle(v.article_id.clone()));
        }
        match origins.get(&v.article_id) {
            Some(Origin::Human) => human.push(v.clone()),
            Some(Origin::Llm) => llm.push(v.clone()),
            None => return Err(EvaluationError::MissingOrigin(v.article_id.clone())),
        }
    }
    let h = confusion(&human, labels)?;
    let l = confusion(&llm, labels)?;
    let o = h + l;
    let scored: std::collections::HashSet<&str> = verdicts.iter().map(|v| v.article_id.as_str()).collect();
    let unscored = expected_ids
        .iter()
        .filter(|id| !scored.contains(id.as_str()))
        .cloned()
        .collect();
    let row = |subset, counts: ConfusionMatrix| SubsetRow {
        subset,
        counts,
        metrics: metrics(&counts),
    };
    Ok(MetricsTable {
        rows: vec![
            row(Subset::HumanWritten, h),
            row(Subset::LlmGenerated, l),
            row(Subset::Overall, o),
        ],
        unscored,
    })
}
