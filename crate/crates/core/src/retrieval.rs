//! BM25 index over the abstract corpus and top-k evidence pairing.
//!
//! Scoring uses the non-negative IDF variant
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`, so a positive score always means
//! the query shares at least one term with the document.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EvidenceAbstract, EvidencePairing, NewsArticle, ScoredEvidence};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("duplicate abstract id {0:?}")]
    DuplicateId(String),
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("index file {path}: {message}")]
    Persist { path: String, message: String },
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k1 > 0.0 && (0.0..=1.0).contains(&self.b) {
            Ok(())
        } else {
            Err(RetrievalError::InvalidParams { k1: self.k1, b: self.b })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    /// Position in `doc_ids`; documents are stored in ascending id order,
    /// so postings sorted by this field are sorted by doc id.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    pub doc_count: usize,
    pub avg_doc_len: f64,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub postings: BTreeMap<String, Vec<Posting>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

fn indexable_text(a: &EvidenceAbstract) -> String {
    format!("{} {}", a.title, a.abstract_text)
}

impl Bm25Index {
    pub fn build(abstracts: &[EvidenceAbstract], params: Bm25Params) -> Result<Self, RetrievalError> {
        params.validate()?;
        if abstracts.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut order: Vec<&EvidenceAbstract> = abstracts.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(RetrievalError::DuplicateId(w[0].id.clone()));
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(order.len());
        for (doc, a) in order.iter().enumerate() {
            let tokens = tokenize(&indexable_text(a));
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: doc as u32,
                    tf: count,
                });
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        Ok(Self {
            params,
            doc_count: order.len(),
            avg_doc_len: total as f64 / order.len() as f64,
            doc_ids: order.iter().map(|a| a.id.clone()).collect(),
            doc_lengths,
            postings,
        })
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = if self.avg_doc_len > 0.0 {
            1.0 - b + b * doc_len as f64 / self.avg_doc_len
        } else {
            1.0
        };
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// Scores of every document for `query`, indexed like `doc_ids`.
    /// Each distinct query term contributes once.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count];
        let mut seen = HashSet::new();
        for term in tokenize(query) {
            if !seen.insert(term.clone()) {
                continue;
            }
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(list.len());
            for p in list {
                scores[p.doc as usize] += idf * self.term_weight(p.tf, self.doc_lengths[p.doc as usize]);
            }
        }
        scores
    }

    /// Best `k` documents with a positive score; ties go to the smaller doc id.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<Hit> {
        let scores = self.score_all(query);
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        // doc indices ascend with doc id, so index order is the tie-break
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .take(k)
            .map(|(i, score)| Hit {
                doc_id: self.doc_ids[i].clone(),
                score,
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let persist = |message: String| RetrievalError::Persist {
            path: path.display().to_string(),
            message,
        };
        let json = serde_json::to_string(self).map_err(|e| persist(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| persist(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let persist = |message: String| RetrievalError::Persist {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| persist(e.to_string()))?;
        let index: Self = serde_json::from_str(&text).map_err(|e| persist(e.to_string()))?;
        index.params.validate()?;
        if index.doc_ids.len() != index.doc_count || index.doc_lengths.len() != index.doc_count {
            return Err(persist("document tables disagree with doc_count".into()));
        }
        Ok(index)
    }
}

/// Result of pairing a batch of articles with evidence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairings: Vec<EvidencePairing>,
    /// Articles that share no vocabulary with the corpus.
    pub zero_match: Vec<String>,
}

/// Ranks up to `k` abstracts for every article, using title + body as the query.
pub fn pair_evidence(articles: &[NewsArticle], index: &Bm25Index, k: usize) -> PairingReport {
    let k = k.max(1);
    let mut report = PairingReport::default();
    for article in articles {
        let hits = index.top_k(&article.full_text(), k);
        if hits.is_empty() {
            report.zero_match.push(article.id.clone());
            continue;
        }
        report.pairings.push(EvidencePairing {
            article_id: article.id.clone(),
            evidence: hits
                .into_iter()
                .map(|h| ScoredEvidence {
                    abstract_id: h.doc_id,
                    score: h.score,
                })
                .collect(),
        });
    }
    report
}
