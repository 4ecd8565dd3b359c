//! Error classes and the exit codes they map to.

use fbm_signature::cubature::CubatureError;
use fbm_signature::expected_signature::SignatureError;
use fbm_signature::grid_approx::GridError;
use fbm_signature::quadrature::QuadError;
use fbm_signature::sde::SdeError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFICATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io(_) => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn quad_is_usage(e: &QuadError) -> bool {
    !matches!(e, QuadError::ToleranceNotMet { .. })
}

fn signature_is_usage(e: &SignatureError) -> bool {
    match e {
        SignatureError::Quadrature(q) => quad_is_usage(q),
        _ => true,
    }
}

fn grid_is_usage(e: &GridError) -> bool {
    match e {
        GridError::Signature(s) => signature_is_usage(s),
        GridError::Factorization(_) | GridError::GapsVanish | GridError::NoiseFloor { .. } => false,
        _ => true,
    }
}

fn classify(usage: bool, msg: String) -> CliError {
    if usage {
        CliError::Usage(msg)
    } else {
        CliError::Numerical(msg)
    }
}

impl From<SignatureError> for CliError {
    fn from(e: SignatureError) -> Self {
        classify(signature_is_usage(&e), e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        classify(grid_is_usage(&e), e.to_string())
    }
}

impl From<CubatureError> for CliError {
    fn from(e: CubatureError) -> Self {
        let usage = match &e {
            CubatureError::Signature(s) => signature_is_usage(s),
            _ => true,
        };
        classify(usage, e.to_string())
    }
}

impl From<SdeError> for CliError {
    fn from(e: SdeError) -> Self {
        let usage = match &e {
            SdeError::NonFinite { .. } | SdeError::SeriesTooLong { .. } => false,
            SdeError::Grid(g) => grid_is_usage(g),
            SdeError::Cubature(CubatureError::Signature(s)) => signature_is_usage(s),
            _ => true,
        };
        classify(usage, e.to_string())
    }
}
