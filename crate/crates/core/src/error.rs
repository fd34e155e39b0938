use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("conditioning event [{lo}, {hi}] has mass {mass:e}, below the floor")]
    ZeroMass { lo: f64, hi: f64, mass: f64 },

    #[error("density unavailable: {0}")]
    DensityUnavailable(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regularity condition violated: {0}")]
    RegularityViolated(String),

    #[error("segmentation does not refine the coarser one: {0}")]
    RefinementViolated(String),

    #[error("invalid breakpoint {0}")]
    InvalidBreakpoint(f64),

    #[error("invalid cell index {0}")]
    InvalidCell(usize),

    #[error("conditional acceptance rate {rate:e} below threshold at cost {cost}")]
    ThinEvent { cost: f64, rate: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
