use std::fmt;

use coret::compatibility::CompatError;
use coret::corpus::CorpusError;
use coret::evaluation::EvalError;
use coret::indexing::IndexError;
use coret::pipeline::PipelineError;
use coret::services::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Input,
    Backend,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Input => 3,
            Kind::Backend => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: Kind::Config, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: Kind::Input, message: message.into() }
    }

    pub fn backend(message: impl Into<String>) -> Self {
        Self { kind: Kind::Backend, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Cache(_) | ServiceError::DimensionMismatch { .. } => Self::config(e.to_string()),
            _ => Self::backend(e.to_string()),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Service(s) => s.into(),
            IndexError::BackendMismatch { .. } | IndexError::DimensionMismatch { .. } => Self::config(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<CompatError> for CliError {
    fn from(e: CompatError) -> Self {
        match e {
            CompatError::Service(s) => s.into(),
            CompatError::BackendMismatch { .. } => Self::config(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Embedding(s) => s.into(),
            PipelineError::Index(i) => i.into(),
            PipelineError::MissingEnrichment(_) => Self::input(format!("{e}; rerun `enrich`")),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::input(e.to_string())
    }
}
