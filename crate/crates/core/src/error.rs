use std::path::PathBuf;

use thiserror::Error;

/// Which of the two loaded matrices of a bin failed a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

impl std::fmt::Display for Part {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Part::Real => f.write_str("real"),
            Part::Imag => f.write_str("imaginary"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("code length must be at least 2, got {0}")]
    InvalidLength(usize),

    #[error("delay lag {lag} outside [-{max}, {max}] for N = {n}", max = .n - 1)]
    LagOutOfRange { lag: i64, n: usize },

    #[error("Doppler bin {bin} outside [{lo}, {hi}] for N = {n}")]
    BinOutOfRange {
        bin: i64,
        lo: i64,
        hi: i64,
        n: usize,
    },

    #[error("region field `{0}` is empty")]
    EmptyIndexSet(&'static str),

    #[error("region contains the mainlobe (k, p) = (0, 0)")]
    MainlobeInRegion,

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("could not parse index set for `{field}`: {reason}")]
    IndexParse { field: &'static str, reason: String },

    #[error("code lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(
        "loaded {part} matrix for (k, p) = ({k}, {p}) is not positive definite \
         (min eigenvalue {min_eig:e}, zeta {zeta})"
    )]
    NotPositiveDefinite {
        k: i64,
        p: i64,
        part: Part,
        min_eig: f64,
        zeta: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    /// True for errors caused by user input rather than the numerics or the filesystem.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidLength(_)
                | Error::LagOutOfRange { .. }
                | Error::BinOutOfRange { .. }
                | Error::EmptyIndexSet(_)
                | Error::MainlobeInRegion
                | Error::InvalidConfig { .. }
                | Error::IndexParse { .. }
                | Error::LengthMismatch(..)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::Numerical(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
