//! Prompt templates loaded from editable files.
//!
//! A template file has an optional `#` comment header, then a `[system]`
//! section and a `[user]` section. Placeholders are written `{{name}}` and
//! substituted in a single pass, so inserted text is never re-expanded.
//! The files shipped in `templates/` are compiled in as defaults; a template
//! directory given at run time overrides them file by file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const JAILBREAK: &str = "generation_jailbreak";
pub const EXTRACTIVE: &str = "summarize_extractive";
pub const ABSTRACTIVE: &str = "summarize_abstractive";
pub const EVIDENCE_SELECTION: &str = "evidence_selection";
pub const ZERO_SHOT: &str = "inference_zero_shot";
pub const FEW_SHOT: &str = "inference_few_shot";
pub const DOV_COT: &str = "inference_dov_cot";
pub const EXEMPLARS_FILE: &str = "few_shot_exemplars.json";

const DEFAULTS: [(&str, &str); 7] = [
    (JAILBREAK, include_str!("../templates/generation_jailbreak.txt")),
    (EXTRACTIVE, include_str!("../templates/summarize_extractive.txt")),
    (ABSTRACTIVE, include_str!("../templates/summarize_abstractive.txt")),
    (EVIDENCE_SELECTION, include_str!("../templates/evidence_selection.txt")),
    (ZERO_SHOT, include_str!("../templates/inference_zero_shot.txt")),
    (FEW_SHOT, include_str!("../templates/inference_few_shot.txt")),
    (DOV_COT, include_str!("../templates/inference_dov_cot.txt")),
];
const DEFAULT_EXEMPLARS: &str = include_str!("../templates/few_shot_exemplars.json");

fn required_placeholders(name: &str) -> &'static [&'static str] {
    match name {
        JAILBREAK => &["abstract"],
        EXTRACTIVE => &["m", "article"],
        ABSTRACTIVE => &["extractive"],
        EVIDENCE_SELECTION => &["summary", "sentences"],
        ZERO_SHOT | DOV_COT => &["news", "evidence"],
        FEW_SHOT => &["example_reliable", "example_unreliable", "news", "evidence"],
        _ => &[],
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {name}: {message}")]
    Malformed { name: String, message: String },
    #[error("template {name} lacks placeholder {{{{{placeholder}}}}}")]
    MissingPlaceholder { name: String, placeholder: String },
    #[error("template {name}: no value for {{{{{placeholder}}}}}")]
    UnboundPlaceholder { name: String, placeholder: String },
    #[error("unknown template {0}")]
    Unknown(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
    pub user: String,
    source: String,
}

impl PromptTemplate {
    pub fn parse(name: &str, source: &str) -> Result<Self, TemplateError> {
        let malformed = |message: &str| TemplateError::Malformed {
            name: name.to_string(),
            message: message.to_string(),
        };
        let sys_at = source.find("[system]").ok_or_else(|| malformed("missing [system] section"))?;
        let user_at = source.find("[user]").ok_or_else(|| malformed("missing [user] section"))?;
        if user_at < sys_at {
            return Err(malformed("[user] must follow [system]"));
        }
        let system = source[sys_at + "[system]".len()..user_at].trim().to_string();
        let user = source[user_at + "[user]".len()..].trim().to_string();
        if user.is_empty() {
            return Err(malformed("empty [user] section"));
        }
        let t = Self {
            name: name.to_string(),
            system,
            user,
            source: source.to_string(),
        };
        for p in required_placeholders(name) {
            if !t.placeholders().iter().any(|x| x == p) {
                return Err(TemplateError::MissingPlaceholder {
                    name: name.to_string(),
                    placeholder: p.to_string(),
                });
            }
        }
        Ok(t)
    }

    /// Placeholder names in order of appearance (system first).
    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        for text in [&self.system, &self.user] {
            let mut rest = text.as_str();
            while let Some(open) = rest.find("{{") {
                let after = &rest[open + 2..];
                match after.find("}}") {
                    Some(close) => {
                        out.push(after[..close].trim().to_string());
                        rest = &after[close + 2..];
                    }
                    None => break,
                }
            }
        }
        out
    }

    fn render_text(&self, text: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else {
                out.push_str(&rest[open..]);
                return Ok(out);
            };
            let key = after[..close].trim();
            let value = values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::UnboundPlaceholder {
                    name: self.name.clone(),
                    placeholder: key.to_string(),
                })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Returns (system, user) with every placeholder substituted.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<(String, String), TemplateError> {
        Ok((self.render_text(&self.system, values)?, self.render_text(&self.user, values)?))
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.source.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub news: String,
    pub evidence: String,
    pub prediction: String,
    pub reason: String,
}

impl Exemplar {
    /// Inline rendering used inside the few-shot prompt.
    pub fn render(&self, label: &str) -> String {
        format!(
            "[{label}] News paragraph: {} Evidence: {} Output: {}",
            self.news,
            self.evidence,
            serde_json::json!({"prediction": self.prediction, "reason": self.reason})
        )
    }
}

/// The two few-shot exemplars: one reliable, one unreliable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarPair {
    #[serde(default)]
    pub note: String,
    pub reliable: Exemplar,
    pub unreliable: Exemplar,
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
    exemplars: ExemplarPair,
    exemplars_source: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = DEFAULTS
            .iter()
            .map(|(n, src)| {
                let t = PromptTemplate::parse(n, src).expect("bundled templates are valid");
                (n.to_string(), t)
            })
            .collect();
        Self {
            templates,
            exemplars: serde_json::from_str(DEFAULT_EXEMPLARS).expect("bundled exemplars are valid"),
            exemplars_source: DEFAULT_EXEMPLARS.to_string(),
        }
    }

    /// Built-in templates overridden by any `<name>.txt` (and the exemplar
    /// file) present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let io = |path: &Path, e: std::io::Error| TemplateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        if !dir.is_dir() {
            return Err(TemplateError::Io {
                path: dir.display().to_string(),
                message: "not a directory".into(),
            });
        }
        let mut set = Self::builtin();
        for (name, _) in DEFAULTS {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let src = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
                set.templates.insert(name.to_string(), PromptTemplate::parse(name, &src)?);
            }
        }
        let ex = dir.join(EXEMPLARS_FILE);
        if ex.exists() {
            let src = std::fs::read_to_string(&ex).map_err(|e| io(&ex, e))?;
            set.exemplars = serde_json::from_str(&src).map_err(|e| TemplateError::Malformed {
                name: EXEMPLARS_FILE.into(),
                message: e.to_string(),
            })?;
            set.exemplars_source = src;
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates.get(name).ok_or_else(|| TemplateError::Unknown(name.into()))
    }

    pub fn exemplars(&self) -> &ExemplarPair {
        &self.exemplars
    }

    /// SHA-256 of every template source and the exemplar file, by name.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self
            .templates
            .iter()
            .map(|(n, t)| (n.clone(), t.content_hash()))
            .collect();
        out.insert(
            EXEMPLARS_FILE.to_string(),
            hex::encode(Sha256::digest(self.exemplars_source.as_bytes())),
        );
        out
    }
}
