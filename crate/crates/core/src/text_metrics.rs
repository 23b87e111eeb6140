//! Sentence splitting, ROUGE-2 and the generation quality gate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::retrieval::tokenize;

/// Generated "true" articles must score strictly above this against their source.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.4;

const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "fig", "figs", "al", "e.g", "i.e", "vs",
    "no", "inc", "ltd", "co", "corp", "approx", "dept", "eq", "vol", "u.s", "u.k", "jan", "feb",
    "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "ph.d", "mt", "gen",
    "gov", "rep", "sen", "ca", "cf", "ref", "refs",
];

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '*')
}

/// The word immediately preceding a '.' at byte `dot`.
fn word_before(text: &str, dot: usize) -> &str {
    let head = &text[..dot];
    let start = head
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace() || c == '(' || c == '"')
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    &head[start..]
}

fn is_abbreviation(word: &str) -> bool {
    let w = word.to_lowercase();
    if ABBREVIATIONS.contains(&w.as_str()) {
        return true;
    }
    // single initial such as the "J" in "J. Smith"
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Splits at '.', '!' or '?' (plus any closing quotes or brackets) followed by
/// whitespace, and at blank lines. A '.' ending a known abbreviation or a
/// single initial does not end a sentence. Returned sentences are trimmed
/// slices of the input.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0usize;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0usize;
    let mut pieces: Vec<(usize, usize)> = Vec::new();
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            while j < chars.len() && is_closing(chars[j].1) {
                j += 1;
            }
            let at_boundary = j >= chars.len() || chars[j].1.is_whitespace();
            let guarded = c == '.' && j == i + 1 && is_abbreviation(word_before(text, pos));
            if at_boundary && !guarded {
                let end = if j < chars.len() { chars[j].0 } else { text.len() };
                pieces.push((start, end));
                start = end;
                i = j;
                continue;
            }
        } else if c == '\n' {
            // blank line ends a paragraph
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                pieces.push((start, pos));
                start = pos;
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    pieces.push((start, text.len()));
    for (s, e) in pieces {
        let t = text[s..e].trim();
        if !t.is_empty() {
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rouge2Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Which ROUGE-2 component the quality gate compares to its threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeVariant {
    #[default]
    F1,
    Recall,
    Precision,
}

impl Rouge2Score {
    pub fn component(&self, variant: RougeVariant) -> f64 {
        match variant {
            RougeVariant::F1 => self.f1,
            RougeVariant::Recall => self.recall,
            RougeVariant::Precision => self.precision,
        }
    }
}

fn bigram_counts(tokens: &[String]) -> HashMap<(&str, &str), usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(2) {
        *counts.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-2 over lowercase alphanumeric tokens, no stemming or stopwords.
pub fn rouge2(candidate: &str, reference: &str) -> Rouge2Score {
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let cand = bigram_counts(&cand_tokens);
    let refs = bigram_counts(&ref_tokens);
    let cand_total = cand_tokens.len().saturating_sub(1);
    let ref_total = ref_tokens.len().saturating_sub(1);
    let overlap: usize = cand
        .iter()
        .map(|(bg, &n)| n.min(refs.get(bg).copied().unwrap_or(0)))
        .sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(overlap, cand_total);
    let recall = ratio(overlap, ref_total);
    // 2PR/(P+R) reduced to counts, so boundary scores such as 0.4 are exact
    let f1 = if overlap == 0 { 0.0 } else { ratio(2 * overlap, cand_total + ref_total) };
    Rouge2Score { precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub generated: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedPair {
    #[serde(flatten)]
    pub pair: GatePair,
    pub score: Rouge2Score,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub kept: Vec<GatedPair>,
    pub rejected: Vec<GatedPair>,
}

/// Keeps a pair iff its ROUGE-2 component is strictly above `threshold`.
pub fn passes_gate(score: &Rouge2Score, threshold: f64, variant: RougeVariant) -> bool {
    score.component(variant) > threshold
}

pub fn quality_gate(pairs: Vec<GatePair>, threshold: f64, variant: RougeVariant) -> GateOutcome {
    let mut outcome = GateOutcome::default();
    for pair in pairs {
        let score = rouge2(&pair.generated, &pair.source);
        let gated = GatedPair { pair, score };
        if passes_gate(&score, threshold, variant) {
            outcome.kept.push(gated);
        } else {
            outcome.rejected.push(gated);
        }
    }
    outcome
}

/// Counts of scores per tenth of [0, 1]; a score of exactly 1.0 lands in the last bin.
pub fn score_histogram(scores: impl IntoIterator<Item = f64>) -> [usize; 10] {
    let mut bins = [0usize; 10];
    for s in scores {
        let idx = ((s.clamp(0.0, 1.0) * 10.0).floor() as usize).min(9);
        bins[idx] += 1;
    }
    bins
}

pub fn histogram_csv(bins: &[usize; 10]) -> String {
    let mut out = String::from("bin_lower,bin_upper,count\n");
    for (i, n) in bins.iter().enumerate() {
        out.push_str(&format!("{:.1},{:.1},{}\n", i as f64 / 10.0, (i + 1) as f64 / 10.0, n));
    }
    out
}
