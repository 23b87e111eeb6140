use std::fmt;

use scinews_core::config::ConfigError;
use scinews_core::corpus::CorpusError;
use scinews_core::evaluation::EvaluationError;
use scinews_core::prompts::TemplateError;
use scinews_core::report::ReportError;
use scinews_core::retrieval::RetrievalError;
use scinews_core::GatewayError;

/// A failed command, classified by the process exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Backend(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Backend(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Backend(m) => write!(f, "backend error: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<TemplateError> for Failure {
    fn from(e: TemplateError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::InvalidParams { .. } => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<EvaluationError> for Failure {
    fn from(e: EvaluationError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        Failure::Backend(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(Failure::from(ConfigError::Invalid("x".into())).exit_code(), 1);
        assert_eq!(Failure::from(CorpusError::Invalid("x".into())).exit_code(), 2);
        assert_eq!(Failure::from(RetrievalError::InvalidParams { k1: -1.0, b: 0.5 }).exit_code(), 1);
        assert_eq!(Failure::from(GatewayError::Timeout).exit_code(), 3);
    }
}
