//! Error classes and exit codes for the command-line tool.

use std::fmt;
use std::path::Path;

use capgrowth_core::ingest::IngestError;
use capgrowth_core::{AnalysisError, IdentityError, ReportError};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad flags or arguments. Exit 2.
    Usage,
    /// Input files that cannot be read or do not make sense. Exit 3.
    Data,
    /// Anything else. Exit 4.
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Internal => 4,
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::Usage => "UsageError",
            ErrorClass::Data => "DataError",
            ErrorClass::Internal => "InternalError",
        })
    }
}

/// A failure reported as one line: `<class>: <kind>: <message>`.
#[derive(Debug, Error)]
#[error("{class}: {kind}: {message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, kind: &'static str, message: impl Into<String>) -> Self {
        // Keep the report on a single line whatever the source message holds.
        let message = message.into().split_whitespace().collect::<Vec<_>>().join(" ");
        Self { class, kind, message }
    }

    pub fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Usage, kind, message)
    }

    pub fn data(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Data, kind, message)
    }

    pub fn internal(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Internal, kind, message)
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        Self::data("ReadFailed", format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let kind = match &e {
            IngestError::EmptyInput => "EmptyInput",
            IngestError::MissingColumn(_) => "MissingColumn",
            IngestError::InvalidRoleMap(_) => "InvalidRoleMap",
            IngestError::ConflictingDuplicate { .. } => "ConflictingDuplicate",
            IngestError::NoQualifyingCountries => "NoQualifyingCountries",
            IngestError::Config(_) => return CliError::usage("InvalidConfig", e.to_string()),
            IngestError::PanelFormat { .. } => "PanelFormat",
            IngestError::Csv(_) => "MalformedCsv",
            IngestError::Io(_) => "ReadFailed",
        };
        CliError::data(kind, e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match &e {
            AnalysisError::InvalidConfig(_) => CliError::usage("InvalidConfig", e.to_string()),
            AnalysisError::InvalidPath(_) => CliError::usage("InvalidPath", e.to_string()),
            AnalysisError::UnknownCountry(_) => CliError::usage("UnknownCountry", e.to_string()),
            AnalysisError::EmptyAfterScreen { .. } => CliError::data("EmptyAfterScreen", e.to_string()),
            AnalysisError::EmptyYearRange { .. } => CliError::data("EmptyYearRange", e.to_string()),
            AnalysisError::Stats(_) => CliError::data("Statistics", e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Analysis(inner) => inner.into(),
            ReportError::UnknownScreenLevel(_) => CliError::usage("UnknownScreenLevel", e.to_string()),
            ReportError::RangeOutsideSnapshot(..) => CliError::usage("RangeOutsideSnapshot", e.to_string()),
            ReportError::EmptySeries(_) => CliError::data("EmptySeries", e.to_string()),
        }
    }
}

impl From<IdentityError> for CliError {
    fn from(e: IdentityError) -> Self {
        let kind = match e {
            IdentityError::InvariantViolation { .. } => "InvariantViolation",
            IdentityError::NonFinite(_) => "NonFinite",
        };
        CliError::data(kind, e.to_string())
    }
}
