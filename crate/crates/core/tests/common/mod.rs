//! Shared helpers for the integration tests: a deterministic scripted model
//! and fixture loading.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use scinews_core::corpus::{load_abstracts, load_articles, load_pairings};
use scinews_core::gateway::{Backend, ChatRequest, GatewayError};
use scinews_core::retrieval::tokenize;
use scinews_core::text_metrics::split_sentences;
use scinews_core::{EvidenceAbstract, EvidencePairing, NewsArticle};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub struct ReplayData {
    pub articles: Vec<NewsArticle>,
    pub abstracts: Vec<EvidenceAbstract>,
    pub pairings: Vec<EvidencePairing>,
}

pub fn load_replay_data() -> ReplayData {
    ReplayData {
        articles: load_articles(&fixture("replay/articles.jsonl")).unwrap(),
        abstracts: load_abstracts(&fixture("replay/abstracts.jsonl")).unwrap(),
        pairings: load_pairings(&fixture("replay/pairings.jsonl")).unwrap(),
    }
}

/// Articles joined with their paired abstracts, in article order.
pub fn jobs(data: &ReplayData) -> Vec<(NewsArticle, Vec<EvidenceAbstract>)> {
    data.articles
        .iter()
        .filter_map(|a| {
            let p = data.pairings.iter().find(|p| p.article_id == a.id)?;
            let ev = p
                .evidence
                .iter()
                .map(|e| data.abstracts.iter().find(|x| x.id == e.abstract_id).unwrap().clone())
                .collect();
            Some((a.clone(), ev))
        })
        .collect()
}

const OVERCLAIM: &[&str] = &[
    "cure", "cures", "proves", "proven", "guarantee", "guaranteed", "guarantees", "miracle", "completely",
    "immune", "never", "eliminate", "eliminates", "forever", "impossible",
];

pub fn overclaims(text: &str) -> bool {
    tokenize(text).iter().any(|t| OVERCLAIM.contains(&t.as_str()))
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let from = text.find(start).map(|i| i + start.len()).unwrap_or(0);
    let rest = &text[from..];
    rest.find(end).map_or(rest, |i| &rest[..i])
}

pub const UNRELIABLE_SCORES: [f64; 5] = [-1.0, -1.0, -1.0, -1.0, 0.0];
pub const RELIABLE_SCORES: [f64; 5] = [1.0, 0.0, 1.0, 0.0, 1.0];

/// Deterministic stand-in for a chat model. It recognises each pipeline
/// stage from the system message and answers the way a cooperative model
/// would; the inference stage refutes news whose text overclaims.
pub fn scripted_response(req: &ChatRequest) -> Result<String, GatewayError> {
    let sys = &req.system_message;
    let user = &req.user_message;
    if sys.contains("extractive summarization") {
        let m: usize = between(user, "Select the ", " most").trim().parse().unwrap_or(1);
        let article = between(user, "Article:\n", "\u{0}");
        return Ok(split_sentences(article).into_iter().take(m).collect::<Vec<_>>().join("\n"));
    }
    if sys.contains("concise, faithful summaries") {
        let key = between(user, "Key sentences:\n", "\u{0}");
        return Ok(key.lines().next().unwrap_or("").to_string());
    }
    if sys.contains("selects evidence") {
        return Ok("[0, 1]".into());
    }
    if sys.contains("Fact Checker") {
        let news = between(user, "News paragraph:\n", "\nEvidence");
        let refute = overclaims(news);
        let (word, reason, scores) = if refute {
            ("refute", "The news overstates what the evidence reports.", UNRELIABLE_SCORES)
        } else {
            ("support", "The news is consistent with the evidence.", RELIABLE_SCORES)
        };
        let mut obj = serde_json::json!({ "prediction": word, "reason": reason });
        if user.contains("'scores'") {
            let names = ["Alignment", "Causation Confusion", "Accuracy", "Generalization", "Contextual Fidelity"];
            let s: serde_json::Map<String, serde_json::Value> =
                names.iter().zip(scores).map(|(n, v)| (n.to_string(), v.into())).collect();
            obj["scores"] = s.into();
        }
        return Ok(format!("Here is my assessment.\n```json\n{obj}\n```"));
    }
    Err(GatewayError::Http {
        status: 400,
        message: "scripted model does not recognise this prompt".into(),
    })
}

/// Closure-backed model that also records every request it sees.
pub struct FnBackend<F> {
    f: F,
    pub calls: AtomicUsize,
    pub seen: Mutex<Vec<ChatRequest>>,
}

impl<F> FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn id(&self) -> &str {
        "scripted"
    }

    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().unwrap().push(request.clone());
        (self.f)(request)
    }
}

pub type ScriptFn = fn(&ChatRequest) -> Result<String, GatewayError>;

pub fn scripted() -> FnBackend<ScriptFn> {
    FnBackend::new(scripted_response as ScriptFn)
}

/// Lowercased alphanumeric runs, written without the library tokenizer.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// (precision, recall, f1) from bigram multisets.
pub fn rouge2_oracle(candidate: &str, reference: &str) -> (f64, f64, f64) {
    use std::collections::HashMap;
    let bigrams = |t: &[String]| {
        let mut m: HashMap<(String, String), i64> = HashMap::new();
        for w in t.windows(2) {
            *m.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
        }
        m
    };
    let c = oracle_tokens(candidate);
    let r = oracle_tokens(reference);
    let (cb, rb) = (bigrams(&c), bigrams(&r));
    let overlap: i64 = cb.iter().map(|(k, v)| (*v).min(*rb.get(k).unwrap_or(&0))).sum();
    let ctot: i64 = cb.values().sum();
    let rtot: i64 = rb.values().sum();
    let p = if ctot > 0 { overlap as f64 / ctot as f64 } else { 0.0 };
    let r = if rtot > 0 { overlap as f64 / rtot as f64 } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Direct BM25 evaluation over (id, text) documents; each distinct query
/// term counts once. Returns the ranked positive-score documents.
pub fn bm25_oracle(docs: &[(String, String)], query: &str, k: usize, k1: f64, b: f64) -> Vec<(String, f64)> {
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| oracle_tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(|t| t.len() as f64).sum::<f64>() / n;
    let mut terms = oracle_tokens(query);
    terms.sort();
    terms.dedup();
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .zip(&toks)
        .map(|((id, _), dt)| {
            let dl = dt.len() as f64;
            let score: f64 = terms
                .iter()
                .map(|q| {
                    let df = toks.iter().filter(|d| d.contains(q)).count() as f64;
                    let tf = dt.iter().filter(|t| *t == q).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
                })
                .sum();
            (id.clone(), score)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
