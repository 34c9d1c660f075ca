use std::path::PathBuf;

use thiserror::Error;
use twistknot::braidtrace::BraidTraceError;
use twistknot::circuit::CircuitError;
use twistknot::knots::KnotError;
use twistknot::pipeline::PipelineError;
use twistknot::twister::TwisterError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerics: {0}")]
    Numerics(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("classification: {0}")]
    Classification(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input {}: {message}", path.display())]
    Input { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::Protocol(_) => 4,
            CliError::Classification(_) => 5,
            CliError::Io { .. } | CliError::Input { .. } => 6,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> CliError {
        CliError::Input { path: path.into(), message: message.to_string() }
    }
}

impl From<TwisterError> for CliError {
    fn from(e: TwisterError) -> Self {
        match e {
            TwisterError::OnBoundary { .. } | TwisterError::DegeneratePoint { .. } | TwisterError::NoAnchor { .. } => {
                CliError::Classification(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<KnotError> for CliError {
    fn from(e: KnotError) -> Self {
        CliError::Classification(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(m)
            | PipelineError::Circuit(CircuitError::Model(m))
            | PipelineError::BraidTrace(BraidTraceError::Model(m)) => m.into(),
            PipelineError::Circuit(CircuitError::Numerics(n)) => CliError::Numerics(format!("circuit: {n}")),
            PipelineError::BraidTrace(BraidTraceError::Numerics(n)) => {
                CliError::Numerics(format!("braid tracing: {n}"))
            }
            PipelineError::Knots(k) => k.into(),
            other => CliError::Protocol(other.to_string()),
        }
    }
}
