//! Detection of misinformation in science news: corpus handling, BM25
//! evidence retrieval, LLM-backed generation and detection pipelines,
//! evaluation and reporting.

pub mod config;
pub mod corpus;
pub mod detection;
pub mod evaluation;
pub mod gateway;
pub mod generation;
pub mod prompts;
pub mod report;
pub mod retrieval;
pub mod text_metrics;

pub use config::RunConfig;
pub use corpus::{EvidenceAbstract, EvidencePairing, Label, NewsArticle, Origin, ScoredEvidence};
pub use detection::{Architecture, DetectionRecord, Detector, DovScores, Strategy, Verdict};
pub use evaluation::{ConfusionMatrix, Metrics, MetricsTable, Subset};
pub use gateway::{Backend, ChatRequest, ChatResponse, Gateway, GatewayError};
pub use prompts::TemplateSet;
pub use retrieval::Bm25Index;
