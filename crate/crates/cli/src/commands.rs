use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use scinews_core::corpus::{
    dataset_stats, keyword_filter, load_abstracts, load_articles, load_pairings, read_jsonl, store_abstracts,
    store_articles, store_pairings, write_jsonl, DEFAULT_KEYWORDS,
};
use scinews_core::detection::AuditRecord;
use scinews_core::evaluation::breakdown;
use scinews_core::gateway::{Cassette, CassetteMode, HttpBackend, ENV_API_KEY, ENV_ENDPOINT};
use scinews_core::generation::{generate_pairs, GeneratedPair, GenerationFailure};
use scinews_core::report::{emit_report, write_audit, FailureLine, FileDigest, RunManifest};
use scinews_core::retrieval::{pair_evidence, Bm25Index};
use scinews_core::text_metrics::{histogram_csv, quality_gate, score_histogram, GatePair};
use scinews_core::{
    Backend, DetectionRecord, Detector, EvidenceAbstract, Gateway, Label, MetricsTable, NewsArticle, Origin,
    RunConfig, TemplateSet, Verdict,
};

use crate::error::{CliResult, Failure};
use crate::{config_failure, Cli, Command};

const HTTP_TIMEOUT: Duration = Duration::from_secs(120);

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(cli.config.config.as_deref(), cli.config.overrides())?;
    cfg.check_paths()?;
    match cli.command {
        Command::Ingest { input, out, kind, filter, keywords } => ingest(&input, &out, &kind, filter, &keywords),
        Command::Index { abstracts, out } => index(&cfg, &abstracts, &out),
        Command::Pair { articles, index, out, zero_match } => pair(&cfg, &articles, &index, &out, zero_match.as_deref()),
        Command::Generate { abstracts, out, rejects, quarantine, resume } => {
            generate(&cfg, &abstracts, &out, &rejects, quarantine.as_deref(), resume)
        }
        Command::Gate { input, kept, rejected, histogram } => gate(&cfg, &input, &kept, &rejected, histogram.as_deref()),
        Command::Detect { articles, pairings, abstracts, out, failures, report_dir } => detect(
            &cfg,
            &DetectInputs { articles, pairings, abstracts },
            &out,
            failures,
            report_dir.as_deref(),
        ),
        Command::Evaluate { verdicts, articles, out_csv, out_json } => {
            evaluate(&verdicts, &articles, out_csv.as_deref(), out_json.as_deref())
        }
        Command::Report { verdicts, articles, out_dir } => report(&cfg, &verdicts, articles.as_deref(), &out_dir),
        Command::Stats { articles } => stats(&articles),
    }
}

fn data_failure(msg: impl Into<String>) -> Failure {
    Failure::Data(msg.into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| data_failure(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| data_failure(format!("{}: {e}", path.display())))
}

fn templates(cfg: &RunConfig) -> CliResult<TemplateSet> {
    Ok(match &cfg.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    })
}

fn http_backend(cfg: &RunConfig) -> CliResult<HttpBackend> {
    let endpoint = match &cfg.endpoint {
        Some(e) => e.clone(),
        None => std::env::var(ENV_ENDPOINT)
            .map_err(|_| config_failure(format!("no endpoint configured; set --endpoint or {ENV_ENDPOINT}")))?,
    };
    Ok(HttpBackend::new(&endpoint, std::env::var(ENV_API_KEY).ok(), HTTP_TIMEOUT)?)
}

/// The gateway for a run plus the cassette to save afterwards, if recording.
struct Connection {
    gateway: Gateway,
    cassette: Option<Arc<Cassette>>,
}

impl Connection {
    fn open(cfg: &RunConfig) -> CliResult<Self> {
        let (backend, cassette): (Arc<dyn Backend>, Option<Arc<Cassette>>) = match &cfg.cassette {
            Some(path) => {
                let inner: Option<Box<dyn Backend>> = match cfg.cassette_mode {
                    CassetteMode::Replay => None,
                    _ => Some(Box::new(http_backend(cfg)?)),
                };
                let c = Arc::new(Cassette::open(path, cfg.cassette_mode, inner)?);
                (c.clone(), Some(c))
            }
            None => (Arc::new(http_backend(cfg)?), None),
        };
        Ok(Self {
            gateway: Gateway::from_arc(backend).with_policy(cfg.retry_policy()),
            cassette,
        })
    }

    fn finish(&self) -> CliResult<()> {
        if let Some(c) = &self.cassette {
            if c.mode() == CassetteMode::Record {
                c.save()?;
            }
        }
        Ok(())
    }
}

fn manifest(cfg: &RunConfig, command: &str, backend_id: &str, templates: &TemplateSet, inputs: &[(&str, &Path)]) -> CliResult<RunManifest> {
    let config = serde_json::to_value(cfg).expect("config serializes");
    let mut m = RunManifest::new(command, config, backend_id, templates);
    let digest = |p: &Path| FileDigest::of(p).map_err(|e| data_failure(format!("{}: {e}", p.display())));
    for (name, path) in inputs {
        m.inputs.insert(name.to_string(), digest(path)?);
    }
    if let Some(c) = &cfg.cassette {
        if c.is_file() {
            m.cassette = Some(digest(c)?);
        }
    }
    Ok(m)
}

fn ingest(input: &Path, out: &Path, kind: &str, filter: bool, keywords: &[String]) -> CliResult<()> {
    match kind {
        "articles" => {
            let articles = load_articles(input)?;
            let total = articles.len();
            let kept = if !keywords.is_empty() {
                keyword_filter(&articles, keywords)
            } else if filter {
                keyword_filter(&articles, &DEFAULT_KEYWORDS)
            } else {
                articles
            };
            store_articles(out, &kept)?;
            println!("ingested {} of {total} articles into {}", kept.len(), out.display());
        }
        "abstracts" => {
            let abstracts = load_abstracts(input)?;
            store_abstracts(out, &abstracts)?;
            println!("ingested {} abstracts into {}", abstracts.len(), out.display());
        }
        other => return Err(config_failure(format!("unknown --kind {other:?}; expected articles or abstracts"))),
    }
    Ok(())
}

fn index(cfg: &RunConfig, abstracts: &Path, out: &Path) -> CliResult<()> {
    let abstracts = load_abstracts(abstracts)?;
    let idx = Bm25Index::build(&abstracts, cfg.bm25_params())?;
    idx.save(out)?;
    println!("indexed {} abstracts into {}", idx.doc_count, out.display());
    Ok(())
}

fn pair(cfg: &RunConfig, articles: &Path, index: &Path, out: &Path, zero_match: Option<&Path>) -> CliResult<()> {
    let articles = load_articles(articles)?;
    let idx = Bm25Index::load(index)?;
    let report = pair_evidence(&articles, &idx, cfg.top_k);
    store_pairings(out, &report.pairings)?;
    if let Some(path) = zero_match {
        let mut text = report.zero_match.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    for id in &report.zero_match {
        tracing::warn!(article_id = %id, "no abstract shares vocabulary with this article");
    }
    println!(
        "paired {} articles, {} without any match",
        report.pairings.len(),
        report.zero_match.len()
    );
    Ok(())
}

/// Abstract ids already handled by a previous run writing to `out` and `rejects`.
fn finished_abstracts(out: &Path, rejects: &Path) -> CliResult<(Vec<NewsArticle>, Vec<GeneratedPair>, HashSet<String>)> {
    let articles = if out.exists() { load_articles(out)? } else { Vec::new() };
    let rejected: Vec<GeneratedPair> = if rejects.exists() { read_jsonl(rejects)? } else { Vec::new() };
    let mut done: HashSet<String> = rejected.iter().map(|p| p.source_abstract_id.clone()).collect();
    for a in &articles {
        if let Some(id) = a.id.strip_suffix("-true").or_else(|| a.id.strip_suffix("-false")) {
            done.insert(id.to_string());
        }
    }
    Ok((articles, rejected, done))
}

fn generate(
    cfg: &RunConfig,
    abstracts_path: &Path,
    out: &Path,
    rejects: &Path,
    quarantine: Option<&Path>,
    resume: bool,
) -> CliResult<()> {
    let abstracts = load_abstracts(abstracts_path)?;
    let templates = templates(cfg)?;
    let (mut articles, mut rejected, done) = if resume {
        finished_abstracts(out, rejects)?
    } else {
        (Vec::new(), Vec::new(), HashSet::new())
    };
    let conn = Connection::open(cfg)?;
    let outcome = generate_pairs(&abstracts, &conn.gateway, &templates, &cfg.generation_config(), &done);
    conn.finish()?;

    articles.extend(outcome.articles);
    rejected.extend(outcome.rejects);
    store_articles(out, &articles)?;
    write_jsonl(rejects, &rejected)?;
    if let Some(path) = quarantine {
        let mut previous: Vec<GenerationFailure> =
            if resume && path.exists() { read_jsonl(path)? } else { Vec::new() };
        previous.extend(outcome.failures.iter().cloned());
        write_jsonl(path, &previous)?;
    }
    println!(
        "generated {} kept pairs, {} rejected, {} failed, {} skipped",
        outcome.kept.len(),
        rejected.len(),
        outcome.failures.len(),
        outcome.skipped.len()
    );
    let attempted = abstracts.len() - outcome.skipped.len();
    if attempted > 0 && outcome.failures.len() == attempted {
        return Err(Failure::Backend(format!(
            "every generation failed; first: {}",
            outcome.failures[0].error
        )));
    }
    Ok(())
}

fn gate(cfg: &RunConfig, input: &Path, kept: &Path, rejected: &Path, histogram: Option<&Path>) -> CliResult<()> {
    let pairs: Vec<GatePair> = read_jsonl(input)?;
    let outcome = quality_gate(pairs, cfg.gate_threshold, cfg.rouge_variant);
    write_jsonl(kept, &outcome.kept)?;
    write_jsonl(rejected, &outcome.rejected)?;
    if let Some(path) = histogram {
        let scores = outcome
            .kept
            .iter()
            .chain(&outcome.rejected)
            .map(|g| g.score.component(cfg.rouge_variant));
        write_text(path, &histogram_csv(&score_histogram(scores)))?;
    }
    println!("kept {}, rejected {}", outcome.kept.len(), outcome.rejected.len());
    Ok(())
}

struct DetectInputs {
    articles: PathBuf,
    pairings: PathBuf,
    abstracts: PathBuf,
}

fn failed_record(article: &NewsArticle, cfg: &RunConfig, error: String) -> DetectionRecord {
    DetectionRecord {
        article_id: article.id.clone(),
        verdict: None,
        error: Some(error),
        audit: AuditRecord::new(&article.id, cfg.architecture, cfg.strategy),
    }
}

fn labelled_table(articles: &[NewsArticle], verdicts: &[Verdict]) -> CliResult<MetricsTable> {
    let mut labels: HashMap<String, Label> = HashMap::new();
    let mut origins: HashMap<String, Origin> = HashMap::new();
    for a in articles {
        let label = a.label.ok_or_else(|| data_failure(format!("article {:?} has no label", a.id)))?;
        let origin = a.origin.ok_or_else(|| data_failure(format!("article {:?} has no origin", a.id)))?;
        labels.insert(a.id.clone(), label);
        origins.insert(a.id.clone(), origin);
    }
    let ids: Vec<String> = articles.iter().map(|a| a.id.clone()).collect();
    Ok(breakdown(verdicts, &labels, &origins, &ids)?)
}

fn detect(
    cfg: &RunConfig,
    inputs: &DetectInputs,
    out: &Path,
    failures: Option<PathBuf>,
    report_dir: Option<&Path>,
) -> CliResult<()> {
    let articles = load_articles(&inputs.articles)?;
    let pairings = load_pairings(&inputs.pairings)?;
    let abstracts = load_abstracts(&inputs.abstracts)?;
    let by_id: HashMap<&str, &EvidenceAbstract> = abstracts.iter().map(|a| (a.id.as_str(), a)).collect();
    let pairing_for: HashMap<&str, _> = pairings.iter().map(|p| (p.article_id.as_str(), p)).collect();

    let mut jobs = Vec::new();
    let mut unpaired = Vec::new();
    for a in &articles {
        match pairing_for.get(a.id.as_str()) {
            Some(p) => {
                let evidence = p
                    .evidence
                    .iter()
                    .map(|e| {
                        by_id.get(e.abstract_id.as_str()).map(|x| (*x).clone()).ok_or_else(|| {
                            data_failure(format!("pairing for {:?} names unknown abstract {:?}", a.id, e.abstract_id))
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                jobs.push((a.clone(), evidence));
            }
            None => unpaired.push(a),
        }
    }

    let templates = templates(cfg)?;
    let conn = Connection::open(cfg)?;
    let detector = Detector::new(conn.gateway.clone(), templates.clone(), cfg.detection_config());
    let mut records = detector.detect_batch(&jobs, cfg.architecture, cfg.strategy);
    conn.finish()?;
    for a in unpaired {
        records.push(failed_record(a, cfg, "article has no evidence pairing".into()));
    }

    let verdicts: Vec<Verdict> = records.iter().filter_map(|r| r.verdict.clone()).collect();
    let failed: Vec<FailureLine> = records
        .iter()
        .filter(|r| r.verdict.is_none())
        .map(|r| FailureLine {
            article_id: r.article_id.clone(),
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    write_jsonl(out, &verdicts)?;
    let failures = failures.unwrap_or_else(|| out.with_extension("failures.jsonl"));
    write_jsonl(&failures, &failed)?;
    if let Some(dir) = &cfg.audit_dir {
        write_audit(&records, dir)?;
    }
    if let Some(dir) = report_dir {
        let labelled = articles.iter().all(|a| a.label.is_some() && a.origin.is_some());
        let table = if labelled { Some(labelled_table(&articles, &verdicts)?) } else { None };
        let m = manifest(
            cfg,
            "detect",
            conn.gateway.backend_id(),
            &templates,
            &[
                ("articles", &inputs.articles),
                ("pairings", &inputs.pairings),
                ("abstracts", &inputs.abstracts),
            ],
        )?;
        emit_report(&records, table.as_ref(), &m, dir)?;
    }
    println!(
        "{} {}: {} verdicts, {} failures",
        cfg.architecture,
        cfg.strategy,
        verdicts.len(),
        failed.len()
    );
    if !articles.is_empty() && verdicts.is_empty() {
        return Err(Failure::Backend(format!(
            "no article received a verdict; first error: {}",
            failed.first().map(|f| f.error.as_str()).unwrap_or("none")
        )));
    }
    Ok(())
}

fn evaluate(verdicts: &Path, articles: &Path, out_csv: Option<&Path>, out_json: Option<&Path>) -> CliResult<()> {
    let verdicts: Vec<Verdict> = read_jsonl(verdicts)?;
    let articles = load_articles(articles)?;
    let table = labelled_table(&articles, &verdicts)?;
    let csv = table.to_csv();
    if let Some(p) = out_csv {
        write_text(p, &csv)?;
    }
    if let Some(p) = out_json {
        write_text(p, &(serde_json::to_string_pretty(&table).expect("table serializes") + "\n"))?;
    }
    print!("{csv}");
    if !table.unscored.is_empty() {
        eprintln!("{} articles have no verdict and were excluded", table.unscored.len());
    }
    Ok(())
}

fn report(cfg: &RunConfig, verdicts_path: &Path, articles: Option<&Path>, out_dir: &Path) -> CliResult<()> {
    let verdicts: Vec<Verdict> = read_jsonl(verdicts_path)?;
    let table = match articles {
        Some(p) => Some(labelled_table(&load_articles(p)?, &verdicts)?),
        None => None,
    };
    let records: Vec<DetectionRecord> = verdicts
        .into_iter()
        .map(|v| DetectionRecord {
            article_id: v.article_id.clone(),
            audit: AuditRecord::new(&v.article_id, v.architecture, v.strategy),
            verdict: Some(v),
            error: None,
        })
        .collect();
    let mut inputs = vec![("verdicts", verdicts_path)];
    if let Some(p) = articles {
        inputs.push(("articles", p));
    }
    let templates = templates(cfg)?;
    let m = manifest(cfg, "report", "none", &templates, &inputs)?;
    let bundle = emit_report(&records, table.as_ref(), &m, out_dir)?;
    println!("wrote {} files to {}", bundle.files.len(), out_dir.display());
    Ok(())
}

fn stats(articles: &Path) -> CliResult<()> {
    let s = dataset_stats(&load_articles(articles)?)?;
    println!("{}", serde_json::to_string_pretty(&s).expect("stats serialize"));
    Ok(())
}
