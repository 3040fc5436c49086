use thiserror::Error;

use crate::dense::LinalgError;

/// Failures of the compact quasi-Newton representations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("initial matrix K0 + {sigma:e} I is not positive definite")]
    InitNotPD { sigma: f64 },
    #[error("no shift delta <= {max_delta:e} made the matrix positive definite")]
    RegularizationFailed { max_delta: f64 },
}
