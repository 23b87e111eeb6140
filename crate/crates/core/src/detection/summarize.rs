//! Extractive then abstractive summarization of a news article.

use std::collections::HashMap;

use regex::Regex;

use crate::retrieval::tokenize;
use crate::text_metrics::{rouge2, split_sentences};

/// A model-returned line that is not a verbatim source sentence is mapped to
/// the closest source sentence only if their ROUGE-2 F1 reaches this value.
pub const NEAREST_MATCH_MIN_F1: f64 = 0.5;

pub const BREVITY_INSTRUCTION: &str =
    "Your previous answer was too long. The summary must be clearly shorter than the key sentences above.";

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "for", "with", "at", "by", "from",
    "as", "is", "are", "was", "were", "be", "been", "being", "it", "its", "this", "that", "these",
    "those", "has", "have", "had", "not", "no", "he", "she", "they", "them", "their", "we", "you",
    "i", "his", "her", "our", "will", "would", "can", "could", "may", "might", "said", "says",
    "also", "than", "which", "who", "whom", "what", "when", "where", "there", "about", "into",
    "more", "most", "do", "does", "did", "so", "if", "such", "s",
];

fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Term-frequency centrality of each sentence: the mean, over the sentence's
/// content words, of the word's article frequency divided by the frequency of
/// the article's most common content word.
pub fn centrality_scores(sentences: &[&str]) -> Vec<f64> {
    let per_sentence: Vec<Vec<String>> = sentences.iter().map(|s| content_tokens(s)).collect();
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for toks in &per_sentence {
        for t in toks {
            *tf.entry(t.as_str()).or_default() += 1;
        }
    }
    let max = tf.values().copied().max().unwrap_or(1) as f64;
    per_sentence
        .iter()
        .map(|toks| {
            if toks.is_empty() {
                0.0
            } else {
                toks.iter().map(|t| tf[t.as_str()] as f64 / max).sum::<f64>() / toks.len() as f64
            }
        })
        .collect()
}

/// Indices of the `m` most central sentences, in source order.
pub fn fallback_extractive(sentences: &[&str], m: usize) -> Vec<usize> {
    let scores = centrality_scores(sentences);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(m).collect();
    picked.sort_unstable();
    picked
}

fn strip_list_marker(line: &str) -> &str {
    static_marker().find(line).map_or(line, |m| &line[m.end()..])
}

fn static_marker() -> &'static Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*•]+|\d+[.)]|\(\d+\))\s+").expect("static regex"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractiveMatch {
    pub indices: Vec<usize>,
    /// Model lines that matched no source sentence.
    pub dropped: Vec<String>,
    /// Model lines replaced by their nearest source sentence.
    pub replaced: Vec<String>,
}

/// Maps model-returned lines onto source sentences: verbatim matches first,
/// then substring containment, then the nearest sentence by ROUGE-2.
pub fn match_extractive_lines(response: &str, sentences: &[&str], m: usize) -> ExtractiveMatch {
    let mut out = ExtractiveMatch::default();
    for raw_line in response.lines() {
        let line = strip_list_marker(raw_line)
            .trim()
            .trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}')
            .trim();
        if line.is_empty() {
            continue;
        }
        let exact = sentences
            .iter()
            .position(|s| *s == line)
            .or_else(|| sentences.iter().position(|s| s.contains(line) && line.len() * 2 >= s.len()));
        let idx = match exact {
            Some(i) => Some(i),
            None => {
                let best = sentences
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i, rouge2(line, s).f1))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                match best {
                    Some((i, f)) if f >= NEAREST_MATCH_MIN_F1 => {
                        out.replaced.push(line.to_string());
                        Some(i)
                    }
                    _ => {
                        out.dropped.push(line.to_string());
                        None
                    }
                }
            }
        };
        if let Some(i) = idx {
            if !out.indices.contains(&i) {
                out.indices.push(i);
            }
        }
    }
    out.indices.truncate(m);
    out.indices.sort_unstable();
    out
}

/// Source sentences of an article body.
pub fn article_sentences(body: &str) -> Vec<&str> {
    split_sentences(body)
}

pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}
