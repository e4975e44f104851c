use std::path::PathBuf;

use thiserror::Error;

use crate::mass::MassCorrection;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("band point is off-shell: scaled residual {residual:.3e}")]
    OffShell { residual: f64 },

    #[error(
        "root scan found {found} roots but mode counting expects {expected} \
         (k_rho = {k_rho}, k_z = {k_z}) after {retries} rescans"
    )]
    RootCount {
        found: usize,
        expected: usize,
        k_rho: f64,
        k_z: f64,
        retries: usize,
    },

    #[error("quadrature did not converge: achieved relative change {achieved:.3e}")]
    NotConverged {
        achieved: f64,
        best: Box<MassCorrection>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
