//! Canonical records for news articles, evidence abstracts and pairings,
//! JSONL storage for each, and corpus statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_metrics::split_sentences;

/// Keyword set used to screen collected news for scientific content.
pub const DEFAULT_KEYWORDS: [&str; 5] = [
    "scientist",
    "investigating",
    "study finds",
    "experts say",
    "experts recommend",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Reliable,
    Unreliable,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Reliable => "Reliable",
            Label::Unreliable => "Unreliable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    Human,
    #[serde(rename = "LLM")]
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    #[serde(default)]
    pub source: String,
    /// ISO-8601 date (`YYYY-MM-DD`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
    /// Model that produced the text, for LLM-origin articles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

impl NewsArticle {
    /// Title and body joined, the text used for retrieval queries and D2I inference.
    pub fn full_text(&self) -> String {
        if self.title.trim().is_empty() {
            self.body.clone()
        } else {
            format!("{}\n\n{}", self.title, self.body)
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("article id is empty".into());
        }
        if self.body.trim().is_empty() {
            return Err(format!("article {:?} has an empty body", self.id));
        }
        if self.origin == Some(Origin::Llm) && self.label.is_none() {
            return Err(format!("LLM-origin article {:?} has no label", self.id));
        }
        if let Some(date) = &self.published {
            chrono::NaiveDate::parse_from_str(date, "%Y-%m-%d")
                .or_else(|_| chrono::DateTime::parse_from_rfc3339(date).map(|d| d.date_naive()))
                .map_err(|_| format!("article {:?} has a non ISO-8601 date {date:?}", self.id))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceAbstract {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external_ids: BTreeMap<String, String>,
}

impl EvidenceAbstract {
    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("abstract id is empty".into());
        }
        if self.abstract_text.trim().is_empty() {
            return Err(format!("abstract {:?} has empty text", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvidence {
    pub abstract_id: String,
    pub score: f64,
}

/// Up to three abstracts ranked for one article, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePairing {
    pub article_id: String,
    pub evidence: Vec<ScoredEvidence>,
}

impl EvidencePairing {
    pub const MAX_EVIDENCE: usize = 3;

    fn validate(&self) -> Result<(), String> {
        if self.evidence.is_empty() || self.evidence.len() > Self::MAX_EVIDENCE {
            return Err(format!(
                "pairing for {:?} must hold 1..=3 abstracts, found {}",
                self.article_id,
                self.evidence.len()
            ));
        }
        let mut seen = HashSet::new();
        for pair in self.evidence.windows(2) {
            if pair[0].score < pair[1].score {
                return Err(format!("pairing for {:?} is not sorted by score", self.article_id));
            }
        }
        for ev in &self.evidence {
            if ev.score.is_nan() || ev.score < 0.0 {
                return Err(format!("negative score in pairing for {:?}", self.article_id));
            }
            if !seen.insert(ev.abstract_id.as_str()) {
                return Err(format!(
                    "pairing for {:?} repeats abstract {:?}",
                    self.article_id, ev.abstract_id
                ));
            }
        }
        Ok(())
    }
}

/// Aggregates over one group of articles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceStats {
    pub article_count: usize,
    pub avg_sentences_per_article: f64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub avg_words_per_sentence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    #[serde(flatten)]
    pub overall: SentenceStats,
    pub per_origin: BTreeMap<String, SentenceStats>,
}

trait Record {
    fn record_id(&self) -> &str;
    fn check(&self) -> Result<(), String>;
}

impl Record for NewsArticle {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), String> {
        self.validate()
    }
}

impl Record for EvidenceAbstract {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), String> {
        self.validate()
    }
}

impl Record for EvidencePairing {
    fn record_id(&self) -> &str {
        &self.article_id
    }
    fn check(&self) -> Result<(), String> {
        self.validate()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a JSONL file into plain serde records; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CorpusError::Invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn load_validated<T: DeserializeOwned + Record>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out: Vec<T> = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        record.check().map_err(|message| CorpusError::Malformed {
            line: line_no,
            message,
        })?;
        if !ids.insert(record.record_id().to_string()) {
            return Err(CorpusError::DuplicateId {
                id: record.record_id().to_string(),
                line: line_no,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_articles(path: &Path) -> Result<Vec<NewsArticle>, CorpusError> {
    load_validated(path)
}

pub fn store_articles(path: &Path, articles: &[NewsArticle]) -> Result<(), CorpusError> {
    write_jsonl(path, articles)
}

pub fn load_abstracts(path: &Path) -> Result<Vec<EvidenceAbstract>, CorpusError> {
    load_validated(path)
}

pub fn store_abstracts(path: &Path, abstracts: &[EvidenceAbstract]) -> Result<(), CorpusError> {
    write_jsonl(path, abstracts)
}

pub fn load_pairings(path: &Path) -> Result<Vec<EvidencePairing>, CorpusError> {
    load_validated(path)
}

pub fn store_pairings(path: &Path, pairings: &[EvidencePairing]) -> Result<(), CorpusError> {
    write_jsonl(path, pairings)
}

/// Keeps articles whose title or body contains at least one keyword
/// (case-insensitive substring, no stemming). Input order is preserved.
pub fn keyword_filter<S: AsRef<str>>(articles: &[NewsArticle], keywords: &[S]) -> Vec<NewsArticle> {
    let needles: Vec<String> = keywords
        .iter()
        .map(|k| k.as_ref().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    articles
        .iter()
        .filter(|a| {
            let title = a.title.to_lowercase();
            let body = a.body.to_lowercase();
            needles
                .iter()
                .any(|k| title.contains(k.as_str()) || body.contains(k.as_str()))
        })
        .cloned()
        .collect()
}

fn sentence_stats(articles: &[&NewsArticle]) -> SentenceStats {
    let mut counts = Vec::with_capacity(articles.len());
    let mut total_words = 0usize;
    for a in articles {
        let sentences = split_sentences(&a.body);
        total_words += sentences
            .iter()
            .map(|s| s.split_whitespace().count())
            .sum::<usize>();
        counts.push(sentences.len());
    }
    let total_sentences: usize = counts.iter().sum();
    SentenceStats {
        article_count: articles.len(),
        avg_sentences_per_article: if articles.is_empty() {
            0.0
        } else {
            total_sentences as f64 / articles.len() as f64
        },
        min_sentences: counts.iter().copied().min().unwrap_or(0),
        max_sentences: counts.iter().copied().max().unwrap_or(0),
        avg_words_per_sentence: if total_sentences == 0 {
            0.0
        } else {
            total_words as f64 / total_sentences as f64
        },
    }
}

/// Sentence and word aggregates, overall and per origin. Words per sentence
/// is pooled over every sentence of the group.
pub fn dataset_stats(articles: &[NewsArticle]) -> Result<CorpusStats, CorpusError> {
    if articles.is_empty() {
        return Err(CorpusError::Invalid("cannot compute statistics of an empty article list".into()));
    }
    let all: Vec<&NewsArticle> = articles.iter().collect();
    let mut groups: BTreeMap<String, Vec<&NewsArticle>> = BTreeMap::new();
    for a in articles {
        let key = match a.origin {
            Some(Origin::Human) => "Human",
            Some(Origin::Llm) => "LLM",
            None => "Unknown",
        };
        groups.entry(key.to_string()).or_default().push(a);
    }
    Ok(CorpusStats {
        overall: sentence_stats(&all),
        per_origin: groups
            .into_iter()
            .map(|(k, v)| (k, sentence_stats(&v)))
            .collect(),
    })
}
