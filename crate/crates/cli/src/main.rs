mod commands;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use error::Failure;

#[derive(Parser, Debug)]
#[command(name = "scinews", version, about = "Scientific news misinformation detection toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Run configuration flags. Each one overrides the key of the same name in
/// the `--config` file.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// Flat JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "model", global = true)]
    pub model_name: Option<String>,
    /// Full URL of an OpenAI-compatible chat completions route.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    #[arg(long, global = true)]
    pub retry_base_ms: Option<u64>,
    /// serif | sif | d2i
    #[arg(long = "arch", global = true)]
    pub architecture: Option<String>,
    /// zero | few | dov-cot
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// ROUGE-2 gate threshold; pairs must score strictly above it.
    #[arg(long = "threshold", global = true)]
    pub gate_threshold: Option<f64>,
    /// f1 | recall | precision
    #[arg(long, global = true)]
    pub rouge_variant: Option<String>,
    #[arg(long, global = true)]
    pub bm25_k1: Option<f64>,
    #[arg(long, global = true)]
    pub bm25_b: Option<f64>,
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Extractive summary length in sentences.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// llm | centrality
    #[arg(long, global = true)]
    pub extractive_mode: Option<String>,
    /// Directory of prompt template files.
    #[arg(long = "templates", global = true)]
    pub templates_dir: Option<PathBuf>,
    /// Record/replay cassette file.
    #[arg(long, global = true)]
    pub cassette: Option<PathBuf>,
    /// replay | record | passthrough
    #[arg(long, global = true)]
    pub cassette_mode: Option<String>,
    /// Directory for per-article audit JSON.
    #[arg(long, global = true)]
    pub audit_dir: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.display().to_string()));
        put("model_name", self.model_name.clone().map(Value::from));
        put("endpoint", self.endpoint.clone().map(Value::from));
        put("temperature", self.temperature.map(Value::from));
        put("max_tokens", self.max_tokens.map(Value::from));
        put("parallelism", self.parallelism.map(Value::from));
        put("max_retries", self.max_retries.map(Value::from));
        put("retry_base_ms", self.retry_base_ms.map(Value::from));
        put("architecture", self.architecture.clone().map(Value::from));
        put("strategy", self.strategy.clone().map(Value::from));
        put("gate_threshold", self.gate_threshold.map(Value::from));
        put("rouge_variant", self.rouge_variant.clone().map(Value::from));
        put("bm25_k1", self.bm25_k1.map(Value::from));
        put("bm25_b", self.bm25_b.map(Value::from));
        put("top_k", self.top_k.map(Value::from));
        put("m", self.m.map(Value::from));
        put("extractive_mode", self.extractive_mode.clone().map(Value::from));
        put("templates_dir", path(&self.templates_dir));
        put("cassette", path(&self.cassette));
        put("cassette_mode", self.cassette_mode.clone().map(Value::from));
        put("audit_dir", path(&self.audit_dir));
        m
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate an articles or abstracts JSONL file, optionally keyword-filtering articles.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// articles | abstracts
        #[arg(long, default_value = "articles")]
        kind: String,
        /// Keep only articles containing one of the default science keywords.
        #[arg(long)]
        filter: bool,
        /// Comma-separated keywords; implies --filter.
        #[arg(long, value_delimiter = ',')]
        keywords: Vec<String>,
    },
    /// Build a BM25 index over an abstracts JSONL file.
    Index {
        #[arg(long)]
        abstracts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair every article with its top-k abstracts.
    Pair {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to list articles that matched no abstract.
        #[arg(long)]
        zero_match: Option<PathBuf>,
    },
    /// Generate true/false article pairs from abstracts and gate them.
    Generate {
        #[arg(long)]
        abstracts: PathBuf,
        /// Generated articles of the kept pairs.
        #[arg(long)]
        out: PathBuf,
        /// Pairs that failed the gate, with their scores.
        #[arg(long)]
        rejects: PathBuf,
        /// Unparseable or failed generations, with the raw model output.
        #[arg(long)]
        quarantine: Option<PathBuf>,
        /// Skip abstracts already present in --out or --rejects and append.
        #[arg(long)]
        resume: bool,
    },
    /// Apply the ROUGE-2 gate to a JSONL of {generated, source} pairs.
    Gate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kept: PathBuf,
        #[arg(long)]
        rejected: PathBuf,
        /// Score histogram CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Run a detection architecture over paired articles.
    Detect {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        pairings: PathBuf,
        #[arg(long)]
        abstracts: PathBuf,
        /// Verdicts JSONL.
        #[arg(long)]
        out: PathBuf,
        /// Failed articles JSONL; defaults to a sibling of --out.
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Also write the full report bundle here.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Compute the metrics table for a verdicts file.
    Evaluate {
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Write a report bundle (verdicts, metrics, radar charts, manifest).
    Report {
        #[arg(long)]
        verdicts: PathBuf,
        /// Labelled articles; metrics are omitted without them.
        #[arg(long)]
        articles: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sentence and word statistics for an articles file.
    Stats {
        #[arg(long)]
        articles: PathBuf,
    },
}

fn main() {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = commands::run(cli) {
        eprintln!("{failure}");
        std::process::exit(failure.exit_code());
    }
}

pub fn config_failure(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_map_to_config_keys() {
        let cli = Cli::try_parse_from([
            "scinews", "stats", "--articles", "a.jsonl", "--arch", "d2i", "--threshold", "0.5", "--templates", "t",
        ])
        .unwrap();
        let o = cli.config.overrides();
        assert_eq!(o["architecture"], "d2i");
        assert_eq!(o["gate_threshold"], 0.5);
        assert_eq!(o["templates_dir"], "t");
        assert!(!o.contains_key("m"));
        let cfg = scinews_core::RunConfig::resolve(None, o).unwrap();
        assert_eq!(cfg.architecture, scinews_core::Architecture::D2i);
    }
}
