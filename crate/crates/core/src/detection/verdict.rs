//! Tolerant parsing of the inference model's JSON verdict.

use serde_json::{Map, Value};
use thiserror::Error;

use super::{prediction_for_word, DovScores};
use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct VerdictParseError {
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVerdict {
    pub prediction: Label,
    /// "support" or "refute", lowercased.
    pub raw_prediction_word: String,
    pub reason: String,
    pub scores: Option<DovScores>,
    /// Scores were requested but incomplete, or the reason was missing.
    pub incomplete: bool,
}

pub const MISSING_REASON: &str = "(no reason given)";

/// Byte range of the balanced `{...}` starting at `start`, honouring strings.
fn balanced_object(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Light repairs for near-JSON: typographic quotes, trailing commas and
/// single-quoted Python-style dicts.
fn repair(candidate: &str) -> String {
    let mut s: String = candidate
        .chars()
        .map(|c| match c {
            '\u{201c}' | '\u{201d}' => '"',
            _ => c,
        })
        .collect();
    if !s.contains('"') {
        s = s.replace('\'', "\"");
    }
    s = strip_comments_and_quote_keys(&s);
    let trailing = regex::Regex::new(r",\s*([}\]])").expect("static regex");
    trailing.replace_all(&s, "$1").into_owned()
}

/// Drops `//` line comments outside strings and wraps bare identifier keys
/// in double quotes.
fn strip_comments_and_quote_keys(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut expect_key = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_string {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                expect_key = false;
                out.push(c);
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '{' | ',' => {
                expect_key = true;
                out.push(c);
            }
            c if expect_key && (c.is_alphabetic() || c == '_') => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let mut j = i;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                if chars.get(j) == Some(&':') {
                    out.push('"');
                    out.push_str(&word);
                    out.push('"');
                } else {
                    out.push_str(&word);
                }
                expect_key = false;
                continue;
            }
            c if c.is_whitespace() => out.push(c),
            _ => {
                expect_key = false;
                out.push(c);
            }
        }
        i += 1;
    }
    out
}

fn parse_object(candidate: &str) -> Option<Map<String, Value>> {
    let parsed = serde_json::from_str::<Value>(candidate)
        .ok()
        .or_else(|| serde_json::from_str::<Value>(&repair(candidate)).ok())?;
    match parsed {
        Value::Object(m) => Some(m),
        _ => None,
    }
}

fn norm_key(k: &str) -> String {
    k.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn find_key<'a>(obj: &'a Map<String, Value>, wanted: &[&str]) -> Option<&'a Value> {
    obj.iter()
        .find(|(k, _)| wanted.contains(&norm_key(k).as_str()))
        .map(|(_, v)| v)
}

fn has_prediction(obj: &Map<String, Value>) -> bool {
    find_key(obj, PREDICTION_KEYS).is_some()
}

const PREDICTION_KEYS: &[&str] = &["prediction", "finalprediction"];
const REASON_KEYS: &[&str] = &["reason", "reasons", "reasoning", "explanation", "justification"];
const SCORE_KEYS: &[&str] = &["scores", "score", "dovscores"];

/// Every object candidate in order of its opening brace.
fn candidates(raw: &str) -> impl Iterator<Item = Map<String, Value>> + '_ {
    raw.match_indices('{').filter_map(move |(start, _)| {
        let end = balanced_object(raw, start)?;
        parse_object(&raw[start..end])
    })
}

fn normalize_word(v: &Value) -> Option<String> {
    let s = v.as_str()?;
    let word = s
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    Some(word)
}

fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        Value::Array(items) => items.iter().map(text_of).collect::<Vec<_>>().join(" "),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn number_of(v: &Value) -> Option<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        Value::Object(o) => find_key(o, &["score", "value"]).and_then(number_of),
        _ => None,
    }?;
    x.is_finite().then_some(x)
}

fn axis_for_key(key: &str) -> Option<usize> {
    let k = norm_key(key);
    if k.starts_with("alignment") {
        Some(0)
    } else if k.starts_with("causation") || k.starts_with("causal") {
        Some(1)
    } else if k.starts_with("accuracy") {
        Some(2)
    } else if k.starts_with("generali") || k.starts_with("overgenerali") {
        Some(3)
    } else if k.starts_with("context") {
        Some(4)
    } else {
        None
    }
}

fn parse_scores(v: &Value) -> Option<DovScores> {
    let mut slots: [Option<f64>; 5] = [None; 5];
    match v {
        Value::Object(o) => {
            for (k, val) in o {
                if let Some(axis) = axis_for_key(k) {
                    slots[axis] = number_of(val);
                }
            }
        }
        Value::Array(items) if items.len() == 5 => {
            for (slot, item) in slots.iter_mut().zip(items) {
                *slot = number_of(item);
            }
        }
        _ => return None,
    }
    let [a, c, acc, g, ctx] = slots;
    Some(DovScores::clamped(a?, c?, acc?, g?, ctx?))
}

/// Extracts the verdict from free-form model output.
///
/// The first balanced JSON object carrying a prediction key is used; prose
/// and code fences around it are ignored. The prediction must be exactly
/// "support" or "refute" once surrounding punctuation is trimmed. Scores are
/// clamped into [-1, 1]; when `expect_scores` is set and any axis is missing
/// the verdict is kept but flagged incomplete.
pub fn parse_verdict(raw: &str, expect_scores: bool) -> Result<ParsedVerdict, VerdictParseError> {
    let fail = |reason: String| VerdictParseError {
        reason,
        raw: raw.to_string(),
    };
    let mut any_object = false;
    let obj = candidates(raw)
        .inspect(|_| any_object = true)
        .find(has_prediction)
        .ok_or_else(|| {
            fail(if any_object {
                "JSON object has no prediction key".into()
            } else {
                "no JSON object found".into()
            })
        })?;

    let pred_value = find_key(&obj, PREDICTION_KEYS).expect("filtered on prediction key");
    let word = normalize_word(pred_value)
        .ok_or_else(|| fail(format!("prediction is not a string: {pred_value}")))?;
    let prediction =
        prediction_for_word(&word).ok_or_else(|| fail(format!("prediction {word:?} is neither support nor refute")))?;

    let mut incomplete = false;
    let reason = find_key(&obj, REASON_KEYS)
        .map(text_of)
        .filter(|r| !r.is_empty())
        .unwrap_or_else(|| {
            incomplete = true;
            MISSING_REASON.to_string()
        });

    let scores = if expect_scores {
        let s = find_key(&obj, SCORE_KEYS).and_then(parse_scores);
        incomplete |= s.is_none();
        s
    } else {
        None
    };

    Ok(ParsedVerdict {
        prediction,
        raw_prediction_word: word,
        reason,
        scores,
        incomplete,
    })
}
