//! The three detection architectures.
//!
//! * SERIf: summarize, select evidence sentences from each paired abstract,
//!   then infer over (summary, selected sentences).
//! * SIf: summarize, then infer over (summary, full abstracts).
//! * D2I: infer over (full article, full abstracts).
//!
//! Every model exchange is kept in an [`AuditRecord`] next to the verdict.

mod evidence;
mod summarize;
mod verdict;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EvidenceAbstract, Label, NewsArticle};
use crate::gateway::{default_temperature, parallel_map, ChatRequest, Gateway, GatewayError, DEFAULT_MAX_TOKENS};
use crate::prompts::{self, ExemplarPair, TemplateError, TemplateSet};

pub use evidence::{abstract_sentences, numbered, parse_indices, resolve_selection, EvidenceSelection, SelectedSentence};
pub use summarize::{
    centrality_scores, fallback_extractive, match_extractive_lines, token_count, ExtractiveMatch,
    BREVITY_INSTRUCTION, NEAREST_MATCH_MIN_F1,
};
pub use verdict::{parse_verdict, ParsedVerdict, VerdictParseError, MISSING_REASON};

/// Label assigned when the model answers "support". The prompts ask whether
/// the evidence supports the news, so support means the news is reliable.
pub const SUPPORT_LABEL: Label = Label::Reliable;
pub const REFUTE_LABEL: Label = Label::Unreliable;

/// Maps a normalized one-word answer to a label; anything else is `None`.
pub fn prediction_for_word(word: &str) -> Option<Label> {
    match word {
        "support" => Some(SUPPORT_LABEL),
        "refute" => Some(REFUTE_LABEL),
        _ => None,
    }
}

pub const DEFAULT_EXTRACTIVE_SENTENCES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "SERIf", alias = "serif")]
    Serif,
    #[serde(rename = "SIf", alias = "sif")]
    Sif,
    #[serde(rename = "D2I", alias = "d2i")]
    D2i,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Serif => "SERIf",
            Architecture::Sif => "SIf",
            Architecture::D2i => "D2I",
        })
    }
}

impl FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "serif" => Ok(Self::Serif),
            "sif" => Ok(Self::Sif),
            "d2i" => Ok(Self::D2i),
            other => Err(format!("unknown architecture {other:?} (expected serif, sif or d2i)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "zero")]
    ZeroShot,
    #[serde(rename = "few")]
    FewShot,
    #[serde(rename = "dov-cot")]
    DovCot,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::ZeroShot => "zero",
            Strategy::FewShot => "few",
            Strategy::DovCot => "dov-cot",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "zero" | "zero-shot" | "zeroshot" => Ok(Self::ZeroShot),
            "few" | "few-shot" | "fewshot" => Ok(Self::FewShot),
            "dov-cot" | "dovcot" | "cot" => Ok(Self::DovCot),
            other => Err(format!("unknown strategy {other:?} (expected zero, few or dov-cot)")),
        }
    }
}

/// Axis names in plotting order.
pub const DOV_AXES: [&str; 5] = [
    "Alignment",
    "Causation Confusion",
    "Accuracy",
    "Generalization",
    "Contextual Fidelity",
];

/// Scores along the five dimensions of validity, each in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DovScores {
    pub alignment: f64,
    pub causation_confusion: f64,
    pub accuracy: f64,
    pub generalization: f64,
    pub contextual_fidelity: f64,
}

impl DovScores {
    pub fn clamped(alignment: f64, causation_confusion: f64, accuracy: f64, generalization: f64, contextual_fidelity: f64) -> Self {
        let c = |x: f64| x.clamp(-1.0, 1.0);
        Self {
            alignment: c(alignment),
            causation_confusion: c(causation_confusion),
            accuracy: c(accuracy),
            generalization: c(generalization),
            contextual_fidelity: c(contextual_fidelity),
        }
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::clamped(v[0], v[1], v[2], v[3], v[4])
    }

    /// Values in [`DOV_AXES`] order.
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.alignment,
            self.causation_confusion,
            self.accuracy,
            self.generalization,
            self.contextual_fidelity,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub article_id: String,
    pub prediction: Label,
    pub raw_prediction_word: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<DovScores>,
    pub architecture: Architecture,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryBundle {
    pub article_id: String,
    pub extractive: Vec<String>,
    pub abstractive: String,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractiveMode {
    /// The model picks salient sentences; term-frequency fallback if it fails.
    Llm,
    /// Term-frequency centrality only; no model call.
    Centrality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub model_name: String,
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    /// Extractive summary length.
    pub m: usize,
    pub extractive_mode: ExtractiveMode,
    pub parallelism: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            model_name: "gpt-4".into(),
            temperature: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            m: DEFAULT_EXTRACTIVE_SENTENCES,
            extractive_mode: ExtractiveMode::Llm,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{stage}: {source}")]
    Gateway {
        stage: &'static str,
        #[source]
        source: GatewayError,
    },
    #[error("verdict parse error: {0}")]
    Verdict(#[from] VerdictParseError),
    #[error("{0}")]
    Precondition(String),
}

/// One model exchange made while processing an article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub stage: String,
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub article_id: String,
    pub architecture: Architecture,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<SummaryBundle>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selections: Vec<EvidenceSelection>,
    pub exchanges: Vec<Exchange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AuditRecord {
    pub fn new(article_id: &str, architecture: Architecture, strategy: Strategy) -> Self {
        Self {
            article_id: article_id.to_string(),
            architecture,
            strategy,
            bundle: None,
            selections: Vec::new(),
            exchanges: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn warn(&mut self, message: String) {
        tracing::warn!(article_id = %self.article_id, "{message}");
        self.warnings.push(message);
    }
}

/// Outcome for one article: a verdict, or the error that prevented one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub article_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub audit: AuditRecord,
}

/// Renders the (news, evidence) pair into the strategy's inference prompt.
/// Evidence texts are numbered and separated by blank lines.
pub fn build_inference_prompt(
    templates: &TemplateSet,
    config: &DetectionConfig,
    strategy: Strategy,
    news_text: &str,
    evidence_texts: &[String],
    exemplars: Option<&ExemplarPair>,
) -> Result<ChatRequest, DetectionError> {
    if evidence_texts.is_empty() {
        return Err(DetectionError::Precondition("inference needs at least one evidence text".into()));
    }
    let evidence = evidence_texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Evidence {}:\n{}", i + 1, t.trim()))
        .collect::<Vec<_>>()
        .join("\n\n");
    let news = news_text.trim();
    let (system, user) = match strategy {
        Strategy::ZeroShot => templates
            .get(prompts::ZERO_SHOT)?
            .render(&[("news", news), ("evidence", &evidence)])?,
        Strategy::DovCot => templates
            .get(prompts::DOV_COT)?
            .render(&[("news", news), ("evidence", &evidence)])?,
        Strategy::FewShot => {
            let ex = exemplars.ok_or_else(|| {
                DetectionError::Precondition("few-shot prompting needs a reliable and an unreliable exemplar".into())
            })?;
            let reliable = ex.reliable.render("reliable");
            let unreliable = ex.unreliable.render("unreliable");
            templates.get(prompts::FEW_SHOT)?.render(&[
                ("example_reliable", &reliable),
                ("example_unreliable", &unreliable),
                ("news", news),
                ("evidence", &evidence),
            ])?
        }
    };
    Ok(request(config, system, user))
}

fn request(config: &DetectionConfig, system: String, user: String) -> ChatRequest {
    ChatRequest {
        system_message: system,
        user_message: user,
        temperature: config
            .temperature
            .unwrap_or_else(|| default_temperature(&config.model_name)),
        max_tokens: config.max_tokens,
        model_name: config.model_name.clone(),
    }
}

/// Title and text of an abstract as shown to the model.
pub fn abstract_text_for_prompt(a: &EvidenceAbstract) -> String {
    if a.title.trim().is_empty() {
        a.abstract_text.trim().to_string()
    } else {
        format!("{}\n{}", a.title.trim(), a.abstract_text.trim())
    }
}

/// Runs the detection pipelines against one gateway.
#[derive(Debug, Clone)]
pub struct Detector {
    gateway: Gateway,
    templates: TemplateSet,
    config: DetectionConfig,
}

impl Detector {
    pub fn new(gateway: Gateway, templates: TemplateSet, config: DetectionConfig) -> Self {
        Self {
            gateway,
            templates,
            config,
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn config(&self) -> &DetectionConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn call(&self, audit: &mut AuditRecord, stage: &'static str, req: ChatRequest) -> Result<String, DetectionError> {
        let result = self.gateway.complete(&req);
        let (response, error) = match &result {
            Ok(r) => (Some(r.text.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        audit.exchanges.push(Exchange {
            stage: stage.to_string(),
            request: req,
            response,
            error,
        });
        result
            .map(|r| r.text)
            .map_err(|source| DetectionError::Gateway { stage, source })
    }

    /// The `m` most salient sentences of the article body, in source order.
    pub fn extractive_summary(
        &self,
        article: &NewsArticle,
        m: usize,
        audit: &mut AuditRecord,
    ) -> Result<(Vec<String>, usize), DetectionError> {
        if m == 0 {
            return Err(DetectionError::Precondition("m must be at least 1".into()));
        }
        let sentences = summarize::article_sentences(&article.body);
        let n = sentences.len();
        if n == 0 {
            return Err(DetectionError::Precondition(format!("article {:?} has no sentences", article.id)));
        }
        if m >= n {
            return Ok((sentences.iter().map(|s| s.to_string()).collect(), n));
        }
        let indices = match self.config.extractive_mode {
            ExtractiveMode::Centrality => fallback_extractive(&sentences, m),
            ExtractiveMode::Llm => {
                let m_text = m.to_string();
                let (system, user) = self
                    .templates
                    .get(prompts::EXTRACTIVE)?
                    .render(&[("m", &m_text), ("article", article.body.trim())])?;
                let response = self.call(audit, "extractive", request(&self.config, system, user))?;
                let matched = match_extractive_lines(&response, &sentences, m);
                for line in &matched.dropped {
                    audit.warn(format!("extractive line matches no source sentence, dropped: {line:?}"));
                }
                for line in &matched.replaced {
                    audit.warn(format!("extractive line was not verbatim, replaced by nearest sentence: {line:?}"));
                }
                if matched.indices.is_empty() {
                    audit.warn("extractive response unusable, using term-frequency centrality".into());
                    fallback_extractive(&sentences, m)
                } else {
                    matched.indices
                }
            }
        };
        Ok((indices.into_iter().map(|i| sentences[i].to_string()).collect(), n))
    }

    /// Condenses the extractive sentences with the abstractive query. A
    /// summary not shorter than its input is retried once with a brevity
    /// instruction, then accepted with a warning.
    pub fn abstractive_summary(&self, extractive: &[String], audit: &mut AuditRecord) -> Result<String, DetectionError> {
        if extractive.is_empty() {
            return Err(DetectionError::Precondition("abstractive summary needs extractive sentences".into()));
        }
        let joined = extractive.join("\n");
        let (system, user) = self
            .templates
            .get(prompts::ABSTRACTIVE)?
            .render(&[("extractive", &joined)])?;
        let limit = token_count(&joined);
        let first = self.call(audit, "abstractive", request(&self.config, system.clone(), user.clone()))?;
        let first = first.trim().to_string();
        if !first.is_empty() && token_count(&first) < limit {
            return Ok(first);
        }
        let retry_user = format!("{user}\n\n{BREVITY_INSTRUCTION}");
        let second = self.call(audit, "abstractive-retry", request(&self.config, system, retry_user))?;
        let second = second.trim().to_string();
        let chosen = if second.is_empty() { first } else { second };
        if chosen.is_empty() {
            return Err(DetectionError::Precondition("abstractive summary is empty".into()));
        }
        if token_count(&chosen) >= limit {
            audit.warn("abstractive summary is not shorter than its extractive input".into());
        }
        Ok(chosen)
    }

    pub fn summarize(&self, article: &NewsArticle, audit: &mut AuditRecord) -> Result<SummaryBundle, DetectionError> {
        let (extractive, n) = self.extractive_summary(article, self.config.m, audit)?;
        let abstractive = self.abstractive_summary(&extractive, audit)?;
        Ok(SummaryBundle {
            article_id: article.id.clone(),
            m: extractive.len(),
            n,
            extractive,
            abstractive,
        })
    }

    /// Asks the model which numbered abstract sentences matter for `summary`.
    pub fn select_evidence_sentences(
        &self,
        summary: &str,
        abstract_: &EvidenceAbstract,
        audit: &mut AuditRecord,
    ) -> Result<EvidenceSelection, DetectionError> {
        let sentences = abstract_sentences(abstract_);
        let listing = numbered(&sentences);
        let (system, user) = self
            .templates
            .get(prompts::EVIDENCE_SELECTION)?
            .render(&[("summary", summary.trim()), ("sentences", &listing)])?;
        let response = self.call(audit, "evidence-selection", request(&self.config, system, user))?;
        let (selection, out_of_range) = resolve_selection(abstract_, &parse_indices(&response));
        if !out_of_range.is_empty() {
            audit.warn(format!(
                "abstract {:?}: dropped out-of-range sentence indices {out_of_range:?} (abstract has {} sentences)",
                abstract_.id,
                sentences.len()
            ));
        }
        if selection.no_relevant_evidence() {
            audit.warn(format!("abstract {:?}: no relevant evidence selected", abstract_.id));
        }
        Ok(selection)
    }

    fn infer(
        &self,
        article_id: &str,
        architecture: Architecture,
        strategy: Strategy,
        news: &str,
        evidence: &[String],
        audit: &mut AuditRecord,
    ) -> Result<Verdict, DetectionError> {
        let req = build_inference_prompt(
            &self.templates,
            &self.config,
            strategy,
            news,
            evidence,
            Some(self.templates.exemplars()),
        )?;
        let raw = self.call(audit, "inference", req)?;
        let parsed = parse_verdict(&raw, strategy == Strategy::DovCot)?;
        if parsed.incomplete {
            audit.warn("verdict is incomplete (missing scores or reason)".into());
        }
        Ok(Verdict {
            article_id: article_id.to_string(),
            prediction: parsed.prediction,
            raw_prediction_word: parsed.raw_prediction_word,
            reason: parsed.reason,
            scores: parsed.scores,
            architecture,
            strategy,
            incomplete: parsed.incomplete,
        })
    }

    fn run(
        &self,
        article: &NewsArticle,
        evidence: &[EvidenceAbstract],
        architecture: Architecture,
        strategy: Strategy,
        audit: &mut AuditRecord,
    ) -> Result<Verdict, DetectionError> {
        if evidence.is_empty() || evidence.len() > crate::corpus::EvidencePairing::MAX_EVIDENCE {
            return Err(DetectionError::Precondition(format!(
                "article {:?} needs 1..=3 paired abstracts, got {}",
                article.id,
                evidence.len()
            )));
        }
        let full_abstracts: Vec<String> = evidence.iter().map(abstract_text_for_prompt).collect();
        match architecture {
            Architecture::D2i => self.infer(&article.id, architecture, strategy, &article.full_text(), &full_abstracts, audit),
            Architecture::Sif => {
                let bundle = self.summarize(article, audit)?;
                let news = bundle.abstractive.clone();
                audit.bundle = Some(bundle);
                self.infer(&article.id, architecture, strategy, &news, &full_abstracts, audit)
            }
            Architecture::Serif => {
                let bundle = self.summarize(article, audit)?;
                let news = bundle.abstractive.clone();
                audit.bundle = Some(bundle);
                let mut selected = Vec::new();
                for a in evidence {
                    let sel = self.select_evidence_sentences(&news, a, audit)?;
                    if !sel.no_relevant_evidence() {
                        selected.push(sel.joined());
                    }
                    audit.selections.push(sel);
                }
                if selected.is_empty() {
                    audit.warn("no evidence sentences selected from any abstract; using full abstracts".into());
                    selected = full_abstracts;
                }
                self.infer(&article.id, architecture, strategy, &news, &selected, audit)
            }
        }
    }

    /// Runs one article through `architecture`. Failures become a record with
    /// an error and no verdict.
    pub fn detect(
        &self,
        article: &NewsArticle,
        evidence: &[EvidenceAbstract],
        architecture: Architecture,
        strategy: Strategy,
    ) -> DetectionRecord {
        let mut audit = AuditRecord::new(&article.id, architecture, strategy);
        let result = self.run(article, evidence, architecture, strategy, &mut audit);
        let (verdict, error) = match result {
            Ok(v) => (Some(v), None),
            Err(e) => {
                tracing::error!(article_id = %article.id, error = %e, "detection failed");
                (None, Some(e.to_string()))
            }
        };
        DetectionRecord {
            article_id: article.id.clone(),
            verdict,
            error,
            audit,
        }
    }

    /// Detects every job with the configured parallelism; output order
    /// follows input order.
    pub fn detect_batch(
        &self,
        jobs: &[(NewsArticle, Vec<EvidenceAbstract>)],
        architecture: Architecture,
        strategy: Strategy,
    ) -> Vec<DetectionRecord> {
        parallel_map(jobs, self.config.parallelism, |(article, evidence)| {
            self.detect(article, evidence, architecture, strategy)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Cassette, CassetteEntry};

    #[test]
    fn names_round_trip() {
        for a in [Architecture::Serif, Architecture::Sif, Architecture::D2i] {
            assert_eq!(a.to_string().parse::<Architecture>().unwrap(), a);
        }
        for s in [Strategy::ZeroShot, Strategy::FewShot, Strategy::DovCot] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("bert".parse::<Architecture>().is_err());
        assert_eq!(serde_json::to_string(&Architecture::D2i).unwrap(), "\"D2I\"");
    }

    #[test]
    fn support_refute_mapping() {
        assert_eq!(prediction_for_word("support"), Some(Label::Reliable));
        assert_eq!(prediction_for_word("refute"), Some(Label::Unreliable));
        assert_eq!(prediction_for_word("maybe"), None);
    }

    #[test]
    fn dov_scores_clamp() {
        let s = DovScores::from_array([1.7, -2.0, 0.3, 0.0, -0.5]);
        assert_eq!(s.as_array(), [1.0, -1.0, 0.3, 0.0, -0.5]);
    }

    fn cfg() -> DetectionConfig {
        DetectionConfig::default()
    }

    #[test]
    fn dov_prompt_lists_axes_and_range() {
        let r = build_inference_prompt(&TemplateSet::builtin(), &cfg(), Strategy::DovCot, "news", &["ev".into()], None).unwrap();
        let text = format!("{}\n{}", r.system_message, r.user_message);
        for axis in ["Alignment", "Causation confusion", "Accuracy", "Generalization", "Contextual Fidelity"] {
            assert!(text.contains(axis), "{axis}");
        }
        assert!(r.user_message.contains("between [-1, 1]"));
        assert!(r.user_message.contains("three keys: prediction, reason and scores"));
    }

    #[test]
    fn zero_shot_prompt_requests_two_keys() {
        let r = build_inference_prompt(&TemplateSet::builtin(), &cfg(), Strategy::ZeroShot, "news", &["a".into(), "b".into()], None).unwrap();
        assert!(r.user_message.contains("two keys: prediction and reason"));
        assert!(r.user_message.contains("Evidence 1:\na\n\nEvidence 2:\nb"));
        assert_eq!(r.temperature, 0.0);
    }

    #[test]
    fn few_shot_needs_exemplars_in_order() {
        let set = TemplateSet::builtin();
        assert!(matches!(
            build_inference_prompt(&set, &cfg(), Strategy::FewShot, "n", &["e".into()], None),
            Err(DetectionError::Precondition(_))
        ));
        let mut ex = set.exemplars().clone();
        ex.reliable.news = "POSITIVE-EXAMPLE".into();
        ex.unreliable.news = "NEGATIVE-EXAMPLE".into();
        let r = build_inference_prompt(&set, &cfg(), Strategy::FewShot, "n", &["e".into()], Some(&ex)).unwrap();
        let pos = r.user_message.find("POSITIVE-EXAMPLE").unwrap();
        let neg = r.user_message.find("NEGATIVE-EXAMPLE").unwrap();
        assert!(pos < neg);
    }

    #[test]
    fn empty_evidence_rejected() {
        assert!(build_inference_prompt(&TemplateSet::builtin(), &cfg(), Strategy::ZeroShot, "n", &[], None).is_err());
    }

    fn article(body: &str) -> NewsArticle {
        NewsArticle {
            id: "n1".into(),
            title: "Headline".into(),
            body: body.into(),
            label: None,
            origin: None,
            source: String::new(),
            published: None,
            generator: None,
        }
    }

    #[test]
    fn m_at_least_n_returns_all_without_call() {
        let gw = Gateway::new(Cassette::replay(vec![]).unwrap());
        let d = Detector::new(gw.clone(), TemplateSet::builtin(), cfg());
        let mut audit = AuditRecord::new("n1", Architecture::Sif, Strategy::ZeroShot);
        let (s, n) = d.extractive_summary(&article("One. Two. Three."), 5, &mut audit).unwrap();
        assert_eq!(s, ["One.", "Two.", "Three."]);
        assert_eq!(n, 3);
        assert_eq!(gw.call_count(), 0);
    }

    #[test]
    fn abstractive_retries_once_when_too_long() {
        let gw = Gateway::new(
            Cassette::replay(vec![
                CassetteEntry::pattern(None, r"zeta eta\.$", "this summary is definitely far too long to accept here"),
                CassetteEntry::pattern(None, r"clearly shorter", "short one"),
            ])
            .unwrap(),
        );
        let d = Detector::new(gw.clone(), TemplateSet::builtin(), cfg());
        let mut audit = AuditRecord::new("n1", Architecture::Sif, Strategy::ZeroShot);
        let s = d
            .abstractive_summary(&["Alpha beta gamma delta.".into(), "Epsilon zeta eta.".into()], &mut audit)
            .unwrap();
        assert_eq!(s, "short one");
        assert_eq!(gw.call_count(), 2);
        assert_eq!(audit.exchanges[1].stage, "abstractive-retry");
    }

    #[test]
    fn empty_extractive_is_precondition_error() {
        let d = Detector::new(Gateway::new(Cassette::replay(vec![]).unwrap()), TemplateSet::builtin(), cfg());
        let mut audit = AuditRecord::new("n1", Architecture::Sif, Strategy::ZeroShot);
        assert!(matches!(d.abstractive_summary(&[], &mut audit), Err(DetectionError::Precondition(_))));
    }
}
