//! Input diagnostics with stable codes.

use std::fmt;

use riskcalc_core::RiskError;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    /// The problem file cannot be read.
    Io,
    /// The file is not well-formed JSON.
    Json,
    /// A field has the wrong JSON type.
    FieldType,
    /// A required section or field is absent.
    Missing,
    /// Lengths or dimensions do not match.
    Dimension,
    /// Probabilities are not positive or do not sum to one.
    Normalization,
    /// A level lies outside its domain, or a grid or interval is malformed.
    LevelDomain,
    /// Box bounds are inconsistent.
    Box,
    /// The information partition does not partition the scenarios.
    Partition,
    /// The risk functional specification is invalid.
    RiskSpec,
    /// A number is infinite or NaN.
    NonFinite,
    /// A command-line argument is malformed.
    Argument,
    /// The model was rejected by the numerical layer.
    Model,
}

impl Code {
    pub const ALL: [Code; 13] = [
        Code::Io,
        Code::Json,
        Code::FieldType,
        Code::Missing,
        Code::Dimension,
        Code::Normalization,
        Code::LevelDomain,
        Code::Box,
        Code::Partition,
        Code::RiskSpec,
        Code::NonFinite,
        Code::Argument,
        Code::Model,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::Io => "E001",
            Code::Json => "E002",
            Code::FieldType => "E003",
            Code::Missing => "E010",
            Code::Dimension => "E011",
            Code::Normalization => "E012",
            Code::LevelDomain => "E013",
            Code::Box => "E014",
            Code::Partition => "E015",
            Code::RiskSpec => "E016",
            Code::NonFinite => "E017",
            Code::Argument => "E020",
            Code::Model => "E030",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A diagnostic located by a field path such as `constraint.grid[0]`, or by
/// `line:column` for syntax errors.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("error[{code}] {location}: {message}")]
pub struct Diagnostic {
    pub code: Code,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn model(location: impl Into<String>, err: RiskError) -> Self {
        Self::new(Code::Model, location, err.to_string())
    }
}
