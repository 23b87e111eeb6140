//! Run outputs: radar charts of DoV scores, the report bundle and its
//! manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::write_jsonl;
use crate::detection::{DetectionRecord, DovScores, Strategy, Verdict, DOV_AXES};
use crate::evaluation::MetricsTable;
use crate::prompts::TemplateSet;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Canvas geometry. Score -1 sits at the centre, 0 at half radius, 1 on the
/// outer ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarLayout {
    pub width: f64,
    pub height: f64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Default for RadarLayout {
    fn default() -> Self {
        Self {
            width: 480.0,
            height: 440.0,
            cx: 240.0,
            cy: 230.0,
            radius: 150.0,
        }
    }
}

impl RadarLayout {
    /// Direction of axis `i`: first axis straight up, then clockwise.
    pub fn angle(i: usize) -> f64 {
        -std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 5.0
    }

    pub fn radius_for(&self, score: f64) -> f64 {
        self.radius * (score.clamp(-1.0, 1.0) + 1.0) / 2.0
    }

    pub fn point(&self, axis: usize, r: f64) -> (f64, f64) {
        let a = Self::angle(axis);
        (self.cx + r * a.cos(), self.cy + r * a.sin())
    }

    pub fn vertices(&self, scores: &DovScores) -> [(f64, f64); 5] {
        let s = scores.as_array();
        std::array::from_fn(|i| self.point(i, self.radius_for(s[i])))
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => {}
            c => out.push(c),
        }
    }
    out
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.3},{y:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn radar_svg(scores: &DovScores, title: &str) -> String {
    radar_svg_with(scores, title, &RadarLayout::default())
}

pub fn radar_svg_with(scores: &DovScores, title: &str, layout: &RadarLayout) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = layout.width,
        h = layout.height
    );
    let _ = writeln!(svg, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"  <text class="title" x="{:.3}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        layout.cx,
        escape_xml(title)
    );

    for level in [-0.5, 0.0, 0.5, 1.0] {
        let r = layout.radius_for(level);
        let ring: Vec<_> = (0..5).map(|i| layout.point(i, r)).collect();
        let (class, stroke, width) = if level == 0.0 {
            ("zero-ring", "#444444", 1.5)
        } else {
            ("ring", "#cccccc", 1.0)
        };
        let _ = writeln!(
            svg,
            r#"  <polygon class="{class}" data-level="{level}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            points(&ring)
        );
    }

    for (i, name) in DOV_AXES.iter().enumerate() {
        let (x, y) = layout.point(i, layout.radius);
        let _ = writeln!(
            svg,
            r##"  <line class="axis" data-axis="{i}" x1="{:.3}" y1="{:.3}" x2="{x:.3}" y2="{y:.3}" stroke="#999999"/>"##,
            layout.cx, layout.cy
        );
        let (lx, ly) = layout.point(i, layout.radius + 18.0);
        let anchor = if (lx - layout.cx).abs() < 1.0 {
            "middle"
        } else if lx > layout.cx {
            "start"
        } else {
            "end"
        };
        let _ = writeln!(
            svg,
            r#"  <text class="axis-label" data-axis="{i}" x="{lx:.3}" y="{:.3}" text-anchor="{anchor}" font-size="12">{}</text>"#,
            ly + 4.0,
            escape_xml(name)
        );
    }

    let verts = layout.vertices(scores);
    let _ = writeln!(
        svg,
        r##"  <polygon class="values" points="{}" fill="#1f77b4" fill-opacity="0.35" stroke="#1f77b4" stroke-width="2"/>"##,
        points(&verts)
    );
    for (i, ((x, y), s)) in verts.iter().zip(scores.as_array()).enumerate() {
        let _ = writeln!(
            svg,
            r##"  <circle class="vertex" data-axis="{i}" data-score="{s}" cx="{x:.3}" cy="{y:.3}" r="3" fill="#1f77b4"/>"##
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        })
    }
}

/// What is needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: String,
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub backend_id: String,
    pub template_hashes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<FileDigest>,
    #[serde(default)]
    pub inputs: BTreeMap<String, FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, backend_id: &str, templates: &TemplateSet) -> Self {
        Self {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            backend_id: backend_id.to_string(),
            template_hashes: templates.hashes(),
            cassette: None,
            inputs: BTreeMap::new(),
        }
    }

    /// Describes every mismatch between the recorded hashes and the
    /// templates and files as they are now. Empty means the run's inputs are
    /// unchanged.
    pub fn verify(&self, templates: &TemplateSet) -> Vec<String> {
        let mut problems = Vec::new();
        let current = templates.hashes();
        for (name, hash) in &self.template_hashes {
            match current.get(name) {
                Some(h) if h == hash => {}
                Some(_) => problems.push(format!("template {name} changed")),
                None => problems.push(format!("template {name} missing")),
            }
        }
        let files = self.cassette.iter().map(|c| ("cassette".to_string(), c)).chain(
            self.inputs.iter().map(|(k, v)| (k.clone(), v)),
        );
        for (label, digest) in files {
            match file_sha256(&digest.path) {
                Ok(h) if h == digest.sha256 => {}
                Ok(_) => problems.push(format!("{label} {} changed", digest.path.display())),
                Err(e) => problems.push(format!("{label} {}: {e}", digest.path.display())),
            }
        }
        problems
    }
}

/// File name for an article's radar chart; ids are reduced to a safe
/// character set.
pub fn radar_file_name(article_id: &str) -> String {
    let safe: String = article_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.svg")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<PathBuf>,
}

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RADAR_DIR: &str = "radar";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureLine {
    pub article_id: String,
    pub error: String,
}

fn write_file(path: &Path, contents: &str, bundle: &mut ReportBundle) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))?;
    bundle.files.push(path.to_path_buf());
    Ok(())
}

/// Writes the verdicts, failures, metrics, radar charts (DoV runs only) and
/// the manifest into `out_dir`.
pub fn emit_report(
    records: &[DetectionRecord],
    metrics: Option<&MetricsTable>,
    manifest: &RunManifest,
    out_dir: &Path,
) -> Result<ReportBundle, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut bundle = ReportBundle::default();

    let verdicts: Vec<Verdict> = records.iter().filter_map(|r| r.verdict.clone()).collect();
    let path = out_dir.join(VERDICTS_FILE);
    write_jsonl(&path, &verdicts).map_err(|e| io_err(&path, e))?;
    bundle.files.push(path);

    let failures: Vec<FailureLine> = records
        .iter()
        .filter(|r| r.verdict.is_none())
        .map(|r| FailureLine {
            article_id: r.article_id.clone(),
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    let path = out_dir.join(FAILURES_FILE);
    write_jsonl(&path, &failures).map_err(|e| io_err(&path, e))?;
    bundle.files.push(path);

    if let Some(table) = metrics {
        write_file(&out_dir.join(METRICS_CSV), &table.to_csv(), &mut bundle)?;
        let json = serde_json::to_string_pretty(table).expect("metrics serialize") + "\n";
        write_file(&out_dir.join(METRICS_JSON), &json, &mut bundle)?;
    }

    let charted: Vec<(&Verdict, &DovScores)> = verdicts
        .iter()
        .filter(|v| v.strategy == Strategy::DovCot)
        .filter_map(|v| v.scores.as_ref().map(|s| (v, s)))
        .collect();
    if !charted.is_empty() {
        let dir = out_dir.join(RADAR_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        for (v, s) in charted {
            let title = format!("{} ({}, {})", v.article_id, v.architecture, v.prediction.as_str());
            write_file(&dir.join(radar_file_name(&v.article_id)), &radar_svg(s, &title), &mut bundle)?;
        }
    }

    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    write_file(&out_dir.join(MANIFEST_FILE), &json, &mut bundle)?;
    Ok(bundle)
}

/// One pretty-printed JSON file per article under `dir`.
pub fn write_audit(records: &[DetectionRecord], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    records
        .iter()
        .map(|r| {
            let name = radar_file_name(&r.article_id).replace(".svg", ".json");
            let path = dir.join(name);
            let json = serde_json::to_string_pretty(&r.audit).expect("audit serializes") + "\n";
            std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::detection::{Architecture, AuditRecord};

    fn radii(svg: &str, layout: &RadarLayout) -> Vec<f64> {
        let doc = roxmltree::Document::parse(svg).expect("well-formed");
        let poly = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("values"))
            .unwrap();
        poly.attribute("points")
            .unwrap()
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
                (x - layout.cx).hypot(y - layout.cy)
            })
            .collect()
    }

    #[test]
    fn all_zero_sits_on_zero_ring() {
        let l = RadarLayout::default();
        let svg = radar_svg(&DovScores::from_array([0.0; 5]), "zero");
        for r in radii(&svg, &l) {
            assert!((r - l.radius / 2.0).abs() < 0.01);
        }
    }

    #[test]
    fn axes_in_fixed_order() {
        let svg = radar_svg(&DovScores::from_array([1.0, 0.0, 1.0, 0.0, 1.0]), "t");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let labels: Vec<&str> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("axis-label"))
            .filter_map(|n| n.text())
            .collect();
        assert_eq!(labels, DOV_AXES);
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("axis")).count(), 5);
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("zero-ring")).count(), 1);
    }

    #[test]
    fn title_is_escaped() {
        let svg = radar_svg(&DovScores::from_array([0.5; 5]), "a < b & \"c\"");
        assert!(roxmltree::Document::parse(&svg).is_ok());
    }

    fn record(id: &str, strategy: Strategy, scores: Option<DovScores>) -> DetectionRecord {
        let verdict = Verdict {
            article_id: id.into(),
            prediction: Label::Reliable,
            raw_prediction_word: "support".into(),
            reason: "r".into(),
            scores,
            architecture: Architecture::Sif,
            strategy,
            incomplete: false,
        };
        DetectionRecord {
            article_id: id.into(),
            verdict: Some(verdict),
            error: None,
            audit: AuditRecord::new(id, Architecture::Sif, strategy),
        }
    }

    fn manifest() -> RunManifest {
        RunManifest::new("detect", serde_json::json!({}), "test", &TemplateSet::builtin())
    }

    #[test]
    fn dov_run_emits_charts() {
        let dir = tempfile::tempdir().unwrap();
        let s = Some(DovScores::from_array([0.0; 5]));
        let recs: Vec<_> = ["a", "b", "c"].iter().map(|id| record(id, Strategy::DovCot, s)).collect();
        emit_report(&recs, None, &manifest(), dir.path()).unwrap();
        assert_eq!(std::fs::read_dir(dir.path().join(RADAR_DIR)).unwrap().count(), 3);
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn zero_shot_run_emits_no_charts() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record("a", Strategy::ZeroShot, None)];
        let bundle = emit_report(&recs, None, &manifest(), dir.path()).unwrap();
        assert!(!dir.path().join(RADAR_DIR).exists());
        assert!(bundle.files.iter().all(|f| f.extension().unwrap() != "svg"));
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let cassette = dir.path().join("c.jsonl");
        std::fs::write(&cassette, "{}\n").unwrap();
        let mut m = manifest();
        m.cassette = Some(FileDigest::of(&cassette).unwrap());
        let templates = TemplateSet::builtin();
        assert!(m.verify(&templates).is_empty());
        std::fs::write(&cassette, "{\"x\":1}\n").unwrap();
        assert_eq!(m.verify(&templates).len(), 1);
        m.template_hashes.insert("inference_zero_shot".into(), "0".repeat(64));
        assert_eq!(m.verify(&templates).len(), 2);
    }

    #[test]
    fn unwritable_directory_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        assert!(emit_report(&[], None, &manifest(), &blocker.join("sub")).is_err());
    }
}
