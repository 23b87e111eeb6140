mod common;

use std::collections::HashMap;
use std::sync::Arc;

use scinews_core::detection::{DetectionConfig, Detector};
use scinews_core::evaluation::breakdown;
use scinews_core::gateway::Gateway;
use scinews_core::report::{emit_report, write_audit, RunManifest, MANIFEST_FILE, RADAR_DIR, VERDICTS_FILE};
use scinews_core::text_metrics::split_sentences;
use scinews_core::{Architecture, Label, Strategy, TemplateSet};

use common::*;

fn detector(backend: Arc<FnBackend<ScriptFn>>) -> Detector {
    Detector::new(Gateway::from_arc(backend), TemplateSet::builtin(), DetectionConfig::default())
}

fn scripted_arc() -> Arc<FnBackend<ScriptFn>> {
    Arc::new(scripted())
}

#[test]
fn every_article_gets_one_verdict_in_input_order() {
    let data = load_replay_data();
    let jobs = jobs(&data);
    for arch in [Architecture::D2i, Architecture::Sif, Architecture::Serif] {
        for strategy in [Strategy::ZeroShot, Strategy::FewShot, Strategy::DovCot] {
            let records = detector(scripted_arc()).detect_batch(&jobs, arch, strategy);
            assert_eq!(records.len(), jobs.len());
            for (r, (a, _)) in records.iter().zip(&jobs) {
                assert_eq!(r.article_id, a.id);
                let v = r.verdict.as_ref().unwrap_or_else(|| panic!("{arch} {strategy} {}: {:?}", a.id, r.error));
                assert_eq!(v.architecture, arch);
                assert_eq!(v.strategy, strategy);
                assert_eq!(v.scores.is_some(), strategy == Strategy::DovCot);
                let expected = if overclaims(&a.full_text()) { Label::Unreliable } else { Label::Reliable };
                if arch == Architecture::D2i {
                    assert_eq!(v.prediction, expected, "{strategy} {}", a.id);
                }
            }
        }
    }
}

#[test]
fn selected_evidence_is_verbatim_from_the_abstract() {
    let data = load_replay_data();
    let records = detector(scripted_arc()).detect_batch(&jobs(&data), Architecture::Serif, Strategy::ZeroShot);
    let by_id: HashMap<_, _> = data.abstracts.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut checked = 0;
    for r in &records {
        for sel in &r.audit.selections {
            let sentences = split_sentences(&by_id[sel.abstract_id.as_str()].abstract_text);
            for s in &sel.sentences {
                assert_eq!(sentences[s.index].trim(), s.text.trim());
                checked += 1;
            }
        }
        let bundle = r.audit.bundle.as_ref().unwrap();
        assert!(bundle.extractive.len() <= bundle.m);
    }
    assert!(checked > 0);
}

#[test]
fn report_bundle_from_replay_run() {
    let data = load_replay_data();
    let d = detector(scripted_arc());
    let records = d.detect_batch(&jobs(&data), Architecture::Sif, Strategy::DovCot);
    let labels = data.articles.iter().map(|a| (a.id.clone(), a.label.unwrap())).collect();
    let origins = data.articles.iter().map(|a| (a.id.clone(), a.origin.unwrap())).collect();
    let ids: Vec<String> = data.articles.iter().map(|a| a.id.clone()).collect();
    let verdicts: Vec<_> = records.iter().filter_map(|r| r.verdict.clone()).collect();
    let table = breakdown(&verdicts, &labels, &origins, &ids).unwrap();

    let out = tempfile::tempdir().unwrap();
    let manifest = RunManifest::new("detect", serde_json::json!({"architecture": "SIf"}), "scripted", d.templates());
    let bundle = emit_report(&records, Some(&table), &manifest, out.path()).unwrap();
    assert!(bundle.files.iter().all(|f| f.is_file()));
    let verdict_lines = std::fs::read_to_string(out.path().join(VERDICTS_FILE)).unwrap().lines().count();
    assert_eq!(verdict_lines, 20);
    assert_eq!(std::fs::read_dir(out.path().join(RADAR_DIR)).unwrap().count(), 20);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(m["backend_id"], "scripted");

    let audit = write_audit(&records, &out.path().join("audit")).unwrap();
    assert_eq!(audit.len(), 20);
    let first: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&audit[0]).unwrap()).unwrap();
    assert_eq!(first["exchanges"].as_array().unwrap().len(), 3);
}
