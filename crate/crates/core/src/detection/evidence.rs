//! Sentence-level evidence selection from a paired abstract.

use serde::{Deserialize, Serialize};

use crate::corpus::EvidenceAbstract;
use crate::text_metrics::split_sentences;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSentence {
    /// Position of the sentence within the abstract.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSelection {
    pub abstract_id: String,
    pub sentences: Vec<SelectedSentence>,
}

impl EvidenceSelection {
    pub fn no_relevant_evidence(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn joined(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn abstract_sentences(a: &EvidenceAbstract) -> Vec<&str> {
    split_sentences(&a.abstract_text)
}

/// One sentence per line, each prefixed with its index in brackets.
pub fn numbered(sentences: &[&str]) -> String {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| format!("[{i}] {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Indices named in a selection response: the first JSON array of integers,
/// or failing that every standalone integer in the text.
pub fn parse_indices(response: &str) -> Vec<i64> {
    let from_array = response.match_indices('[').find_map(|(start, _)| {
        let end = response[start..].find(']')? + start + 1;
        let v: Vec<serde_json::Value> = serde_json::from_str(&response[start..end]).ok()?;
        let ints: Vec<i64> = v
            .iter()
            .filter_map(|x| x.as_i64().or_else(|| x.as_str()?.trim().parse().ok()))
            .collect();
        (ints.len() == v.len()).then_some(ints)
    });
    if let Some(ints) = from_array {
        return ints;
    }
    let re = regex::Regex::new(r"-?\b\d+\b").expect("static regex");
    re.find_iter(response)
        .filter_map(|m| m.as_str().parse().ok())
        .collect()
}

/// Resolves indices against the abstract's sentences. Out-of-range indices
/// are returned separately so the caller can warn about them.
pub fn resolve_selection(abstract_: &EvidenceAbstract, indices: &[i64]) -> (EvidenceSelection, Vec<i64>) {
    let sentences = abstract_sentences(abstract_);
    let mut picked: Vec<usize> = Vec::new();
    let mut rejected = Vec::new();
    for &i in indices {
        match usize::try_from(i).ok().filter(|&u| u < sentences.len()) {
            Some(u) if !picked.contains(&u) => picked.push(u),
            Some(_) => {}
            None => rejected.push(i),
        }
    }
    picked.sort_unstable();
    (
        EvidenceSelection {
            abstract_id: abstract_.id.clone(),
            sentences: picked
                .into_iter()
                .map(|index| SelectedSentence {
                    index,
                    text: sentences[index].to_string(),
                })
                .collect(),
        },
        rejected,
    )
}
