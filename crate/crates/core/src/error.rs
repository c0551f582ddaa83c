use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("non-numeric cell at row {row}, column {col} ({name}): {value:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },

    #[error("response column absent: {0:?}")]
    ResponseColumnAbsent(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("constant column {0}")]
    ConstantColumn(usize),

    #[error("eigensolver did not converge (condition estimate {condition:.3e})")]
    EigenNonConvergence { condition: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("factorization failed at iteration {iteration}: {what}")]
    Factorization { iteration: usize, what: String },

    #[error("covariance is not factorizable even after jitter")]
    CovarianceNotFactorizable,

    #[error("Dirichlet normalization failed: {0}")]
    DirichletUnderflow(String),

    #[error("no path step has fewer than {max_size} active variables")]
    NoEligibleModel { max_size: usize },

    #[error("ordering is not a permutation of 0..{p}")]
    NotAPermutation { p: usize },

    #[error("cubic discriminant negative (B = {b:.6e}); no unique real root")]
    NegativeDiscriminant { b: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
