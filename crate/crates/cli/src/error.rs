use std::process::ExitCode;

use pcdet_core::dataio::DataError;
use pcdet_core::eval::EvalError;
use pcdet_core::geometry::GeometryError;
use pcdet_core::head::HeadError;
use pcdet_core::neighborhood::NeighborError;
use pcdet_core::nn::NnError;
use pcdet_core::sampling::SamplingError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERIC: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Numeric(_) => exit::NUMERIC,
        })
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::NonFiniteScore { .. } => CliError::Numeric(e.to_string()),
            SamplingError::InvalidCloud(_) | SamplingError::MissingFeatures => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::NonFiniteScore(_) => CliError::Numeric(e.to_string()),
            GeometryError::InvalidBox(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NeighborError> for CliError {
    fn from(e: NeighborError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteGradient(_) => CliError::Numeric(e.to_string()),
            NnError::Checkpoint(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownFrame(_) => CliError::Data(e.to_string()),
            EvalError::ThresholdCount { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<HeadError> for CliError {
    fn from(e: HeadError) -> Self {
        match e {
            HeadError::Config(_) | HeadError::Checkpoint(_) => CliError::Config(e.to_string()),
            HeadError::NonFinite(_) => CliError::Numeric(e.to_string()),
            HeadError::EmptyScene | HeadError::Parse { .. } => CliError::Data(e.to_string()),
            HeadError::Nn(n) => n.into(),
            HeadError::Geometry(g) => g.into(),
            HeadError::Sampling(s) => s.into(),
            HeadError::Neighbor(n) => n.into(),
            HeadError::Data(d) => d.into(),
        }
    }
}
