use std::fmt;

use exposure_core::eval::EvalError;
use exposure_core::exposure::MetricsError;
use exposure_core::ingest::IngestError;
use exposure_core::report::ReportError;
use exposure_core::tightness::TightnessError;

/// Exit codes: 1 configuration, 2 input data, 3 failed check.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Check(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Check(m) => f.write_str(m),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::File { .. }
            | IngestError::MissingDir(_)
            | IngestError::ClassMap { .. }
            | IngestError::Meta(_)
            | IngestError::Csv(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Config(m) => CliError::Config(m),
            MetricsError::Ingest(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Geom(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TightnessError> for CliError {
    fn from(e: TightnessError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Config(format!("writing report: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
