//! Linear-Gaussian state-space model with diagonal measurement noise.
//!
//! ```text
//! y_t = Λ x_t + ξ_t,      ξ_t ~ N(0, diag(R))
//! x_t = A x_{t-1} + u_t,  u_t ~ N(0, Q)
//! ```
//! `x0`, `P0` are the prior mean and covariance of `x_1`. Missing
//! observations are NaN entries of the data matrix (rows are time).

mod filter;
mod smoother;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{discrete_lyapunov, is_psd};

pub use filter::{kalman_filter, FilterOutput};
pub use smoother::{kalman_smoother, SmootherOutput};

/// Fallback initial variance scale for non-stationary transitions.
pub const DIFFUSE_SCALE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateSpaceError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{name} is not symmetric positive semi-definite")]
    NotPsd { name: &'static str },
    #[error("measurement variance {index} is {value}, must be strictly positive")]
    NonPositiveVariance { index: usize, value: f64 },
    #[error("innovation covariance is numerically singular at t = {t}")]
    SingularInnovation { t: usize },
    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    /// N x k
    pub lambda: DMatrix<f64>,
    /// k x k
    pub a: DMatrix<f64>,
    /// k x k
    pub q: DMatrix<f64>,
    /// Diagonal of the N x N measurement covariance.
    pub r: DVector<f64>,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        lambda: DMatrix<f64>,
        a: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DVector<f64>,
        x0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self, StateSpaceError> {
        let m = Self { lambda, a, q, r, x0, p0 };
        m.validate()?;
        Ok(m)
    }

    /// Zero initial mean and the stationary covariance of the transition,
    /// or `DIFFUSE_SCALE · I` when the transition is not stable.
    pub fn with_stationary_init(
        lambda: DMatrix<f64>,
        a: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DVector<f64>,
    ) -> Result<Self, StateSpaceError> {
        let k = a.nrows();
        let p0 = stationary_covariance(&a, &q);
        Self::new(lambda, a, q, r, DVector::zeros(k), p0)
    }

    pub fn n_obs(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<(), StateSpaceError> {
        let k = self.a.nrows();
        let n = self.lambda.nrows();
        let dim = |what: &str| Err(StateSpaceError::Dimension(what.to_string()));
        if self.a.ncols() != k {
            return dim("A must be square");
        }
        if self.lambda.ncols() != k {
            return dim("Λ columns must equal the state dimension");
        }
        if self.q.shape() != (k, k) || self.p0.shape() != (k, k) {
            return dim("Q and P0 must be k x k");
        }
        if self.x0.len() != k {
            return dim("x0 must have length k");
        }
        if self.r.len() != n {
            return dim("R must have one variance per observation row");
        }
        if let Some((index, &value)) = self.r.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(StateSpaceError::NonPositiveVariance { index, value });
        }
        if !is_psd(&self.q, 1e-10) {
            return Err(StateSpaceError::NotPsd { name: "Q" });
        }
        if !is_psd(&self.p0, 1e-10) {
            return Err(StateSpaceError::NotPsd { name: "P0" });
        }
        Ok(())
    }
}

/// Stationary state covariance for `x_t = A x_{t-1} + u_t`, falling back to a
/// scaled identity when `A` has a (near) unit root.
pub fn stationary_covariance(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows();
    discrete_lyapunov(a, q).unwrap_or_else(|| DMatrix::identity(k, k) * DIFFUSE_SCALE)
}
