//! LLM-generated corpus construction: one prompt per abstract asks for a
//! "True" and a "Convincing False" news article, the response is split into
//! the two versions, and the true version is gated on ROUGE-2 against its
//! source abstract.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EvidenceAbstract, Label, NewsArticle, Origin};
use crate::gateway::{default_temperature, ChatRequest, Gateway, DEFAULT_MAX_TOKENS};
use crate::prompts::{TemplateError, TemplateSet, JAILBREAK};
use crate::text_metrics::{passes_gate, rouge2, Rouge2Score, RougeVariant, DEFAULT_GATE_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_name: String,
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    pub threshold: f64,
    pub variant: RougeVariant,
    pub parallelism: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model_name: "llama-2-7b-chat".into(),
            temperature: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            threshold: DEFAULT_GATE_THRESHOLD,
            variant: RougeVariant::F1,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct PairParseError {
    pub reason: String,
    /// Full model output, kept for manual triage.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub source_abstract_id: String,
    pub true_article: String,
    pub false_article: String,
    pub generator: String,
    pub gate_score: Rouge2Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub abstract_id: String,
    pub error: String,
    /// Model output when the failure happened while parsing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub articles: Vec<NewsArticle>,
    pub kept: Vec<GeneratedPair>,
    pub rejects: Vec<GeneratedPair>,
    pub failures: Vec<GenerationFailure>,
    pub skipped: Vec<String>,
}

pub fn build_jailbreak_prompt(
    abstract_: &EvidenceAbstract,
    templates: &TemplateSet,
    config: &GenerationConfig,
) -> Result<ChatRequest, TemplateError> {
    if abstract_.abstract_text.trim().is_empty() {
        return Err(TemplateError::Malformed {
            name: JAILBREAK.into(),
            message: format!("abstract {:?} has no text", abstract_.id),
        });
    }
    let (system, user) = templates
        .get(JAILBREAK)?
        .render(&[("abstract", abstract_.abstract_text.trim())])?;
    Ok(ChatRequest {
        system_message: system,
        user_message: user,
        temperature: config
            .temperature
            .unwrap_or_else(|| default_temperature(&config.model_name)),
        max_tokens: config.max_tokens,
        model_name: config.model_name.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Version {
    True,
    False,
}

const HEADER_WORDS: &[&str] = &[
    "true", "false", "fake", "convincing", "version", "article", "articles", "news", "story", "the",
    "a", "1", "2", "one", "two", "first", "second", "label", "labeled", "labelled", "newspaper",
    "style", "title", "i", "ii", "real", "accurate", "misleading", "convincingly",
];

fn header_words(text: &str) -> Option<Version> {
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() || words.len() > 6 || !words.iter().all(|w| HEADER_WORDS.contains(w)) {
        return None;
    }
    let has = |w: &str| words.contains(&w);
    let truthful = has("true") || has("real") || has("accurate");
    let untruthful = has("false") || has("fake") || has("misleading");
    match (truthful, untruthful) {
        (true, false) => Some(Version::True),
        (false, true) => Some(Version::False),
        _ => None,
    }
}

fn strip_decoration(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || "#*_>`'\"[](){}-=|".contains(c))
}

/// Recognizes a section header line; returns the version and any text that
/// follows the header on the same line (e.g. a headline after a colon).
fn classify_header(line: &str) -> Option<(Version, String)> {
    let core = strip_decoration(line);
    if core.is_empty() {
        return None;
    }
    if let Some(v) = header_words(core.trim_end_matches(':')) {
        return Some((v, String::new()));
    }
    let (prefix, rest) = core.split_once(':')?;
    let v = header_words(prefix)?;
    Some((v, strip_decoration(rest).to_string()))
}

fn is_trailing_note(paragraph: &str) -> bool {
    let p = strip_decoration(paragraph).to_lowercase();
    ["note:", "note that", "please note", "disclaimer", "i hope", "remember,"]
        .iter()
        .any(|s| p.starts_with(s))
}

fn clean_section(lines: &[String]) -> String {
    let text = lines
        .iter()
        .map(|l| match l.trim_start().strip_prefix('>') {
            Some(rest) => rest.trim_start(),
            None => l.as_str(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut paragraphs: Vec<&str> = text
        .split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty() && !p.chars().all(|c| "-*=_ ".contains(c)))
        .collect();
    while paragraphs.last().is_some_and(|p| is_trailing_note(p)) {
        paragraphs.pop();
    }
    paragraphs.join("\n\n")
}

/// Splits a model response into its "True" and "Convincing False" articles.
///
/// Header lines may carry markdown or numbering ("**True Article**",
/// "Version 1 (True)", "## Convincing False:"). Text before the first header
/// and closing notes after the last section are discarded. A response with a
/// missing, duplicated or empty section is rejected rather than guessed at.
pub fn parse_generated_pair(response: &str) -> Result<(String, String), PairParseError> {
    let fail = |reason: &str| PairParseError {
        reason: reason.to_string(),
        raw: response.to_string(),
    };
    let mut sections: Vec<(Version, Vec<String>)> = Vec::new();
    for line in response.lines() {
        if let Some((version, inline)) = classify_header(line) {
            if sections.iter().any(|(v, _)| *v == version) {
                return Err(fail(match version {
                    Version::True => "more than one 'True' header",
                    Version::False => "more than one 'Convincing False' header",
                }));
            }
            let mut body = Vec::new();
            if !inline.is_empty() {
                body.push(inline);
            }
            sections.push((version, body));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push(line.to_string());
        }
    }
    let take = |version: Version| {
        sections
            .iter()
            .find(|(v, _)| *v == version)
            .map(|(_, lines)| clean_section(lines))
    };
    let true_text = take(Version::True).ok_or_else(|| fail("no 'True' section header"))?;
    let false_text = take(Version::False).ok_or_else(|| fail("no 'Convincing False' section header"))?;
    if true_text.is_empty() {
        return Err(fail("'True' section is empty"));
    }
    if false_text.is_empty() {
        return Err(fail("'Convincing False' section is empty"));
    }
    Ok((true_text, false_text))
}

/// Separates a leading headline from the article body when the first line
/// looks like one.
pub fn split_headline(text: &str) -> (String, String) {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let rest = lines.collect::<Vec<_>>().join("\n");
    let candidate = strip_decoration(first);
    let candidate = candidate
        .strip_prefix("Title:")
        .or_else(|| candidate.strip_prefix("Headline:"))
        .map(strip_decoration)
        .unwrap_or(candidate);
    let words = candidate.split_whitespace().count();
    if !rest.trim().is_empty() && (1..=20).contains(&words) && !candidate.ends_with('.') {
        (candidate.to_string(), rest.trim().to_string())
    } else {
        (String::new(), text.trim().to_string())
    }
}

fn article_from(pair: &GeneratedPair, label: Label) -> NewsArticle {
    let (suffix, text) = match label {
        Label::Reliable => ("true", &pair.true_article),
        Label::Unreliable => ("false", &pair.false_article),
    };
    let (title, body) = split_headline(text);
    NewsArticle {
        id: format!("{}-{suffix}", pair.source_abstract_id),
        title,
        body,
        label: Some(label),
        origin: Some(Origin::Llm),
        source: "generated".into(),
        published: None,
        generator: Some(pair.generator.clone()),
    }
}

/// Scores the true article against its abstract and splits kept from rejected.
/// Kept pairs each yield one Reliable and one Unreliable LLM-origin article.
pub fn gate_pairs(
    pairs: Vec<GeneratedPair>,
    threshold: f64,
    variant: RougeVariant,
) -> (Vec<NewsArticle>, Vec<GeneratedPair>, Vec<GeneratedPair>) {
    let (mut articles, mut kept, mut rejects) = (Vec::new(), Vec::new(), Vec::new());
    for pair in pairs {
        if passes_gate(&pair.gate_score, threshold, variant) {
            articles.push(article_from(&pair, Label::Reliable));
            articles.push(article_from(&pair, Label::Unreliable));
            kept.push(pair);
        } else {
            rejects.push(pair);
        }
    }
    (articles, kept, rejects)
}

/// Prompt, complete, parse and gate every abstract whose id is not in
/// `already_done`. Abstracts are processed in id order; per-abstract failures
/// are recorded without stopping the batch.
pub fn generate_pairs(
    abstracts: &[EvidenceAbstract],
    gateway: &Gateway,
    templates: &TemplateSet,
    config: &GenerationConfig,
    already_done: &HashSet<String>,
) -> GenerationOutcome {
    let mut outcome = GenerationOutcome::default();
    let mut todo: Vec<&EvidenceAbstract> = Vec::new();
    for a in abstracts {
        if already_done.contains(&a.id) {
            outcome.skipped.push(a.id.clone());
        } else {
            todo.push(a);
        }
    }
    todo.sort_by(|a, b| a.id.cmp(&b.id));
    todo.dedup_by(|a, b| a.id == b.id);

    let mut requests = Vec::new();
    let mut ready = Vec::new();
    for a in todo {
        match build_jailbreak_prompt(a, templates, config) {
            Ok(r) => {
                requests.push(r);
                ready.push(a);
            }
            Err(e) => outcome.failures.push(GenerationFailure {
                abstract_id: a.id.clone(),
                error: e.to_string(),
                raw: None,
            }),
        }
    }

    let responses = gateway.run_batch(&requests, config.parallelism);
    let mut pairs = Vec::new();
    for (a, resp) in ready.into_iter().zip(responses) {
        let text = match resp {
            Ok(r) => r.text,
            Err(e) => {
                outcome.failures.push(GenerationFailure {
                    abstract_id: a.id.clone(),
                    error: e.to_string(),
                    raw: None,
                });
                continue;
            }
        };
        match parse_generated_pair(&text) {
            Ok((true_article, false_article)) => {
                let gate_score = rouge2(&true_article, &a.abstract_text);
                pairs.push(GeneratedPair {
                    source_abstract_id: a.id.clone(),
                    true_article,
                    false_article,
                    generator: config.model_name.clone(),
                    gate_score,
                });
            }
            Err(e) => {
                tracing::warn!(abstract_id = %a.id, reason = %e.reason, "unparseable generation quarantined");
                outcome.failures.push(GenerationFailure {
                    abstract_id: a.id.clone(),
                    error: e.reason,
                    raw: Some(e.raw),
                });
            }
        }
    }
    let (articles, kept, rejects) = gate_pairs(pairs, config.threshold, config.variant);
    outcome.articles = articles;
    outcome.kept = kept;
    outcome.rejects = rejects;
    outcome
}
