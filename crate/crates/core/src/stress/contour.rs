use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::StressError;
use crate::linalg::{is_psd, psd_cholesky, spd_inverse};

/// Ellipsoid `{x : (x - c)' Σ^{-1} (x - c) = r²}` with `r²` the `α` quantile
/// of a `χ²_d` law.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub center: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub radius2: f64,
    pub cholesky: DMatrix<f64>,
}

pub fn chi2_radius2(d: usize, alpha: f64) -> f64 {
    ChiSquared::new(d as f64).expect("positive degrees of freedom").inverse_cdf(alpha)
}

impl Contour {
    pub fn new(center: DVector<f64>, covariance: DMatrix<f64>, alpha: f64) -> Result<Self, StressError> {
        let d = center.len();
        if covariance.shape() != (d, d) {
            return Err(StressError::Dimension(format!("{d}-vector center with {:?} covariance", covariance.shape())));
        }
        if d == 0 {
            return Err(StressError::Dimension("empty contour".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(StressError::Config(format!("contour probability {alpha} outside (0, 1)")));
        }
        if !is_psd(&covariance, 1e-10 * (1.0 + covariance.amax())) {
            return Err(StressError::Covariance("contour covariance is not positive semidefinite".into()));
        }
        let cholesky = psd_cholesky(&covariance);
        Ok(Self { center, covariance, radius2: chi2_radius2(d, alpha), cholesky })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius2.sqrt()
    }

    /// Image of a unit vector on the contour.
    pub fn point(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.cholesky * u * self.radius()
    }

    pub fn mahalanobis2(&self, x: &DVector<f64>) -> Option<f64> {
        let inv = spd_inverse(&self.covariance)?;
        let v = x - &self.center;
        Some(v.dot(&(inv * &v)))
    }

    /// Exact minimum of `b'x` on the contour, `b'c - r ‖L'b‖`.
    pub fn linear_minimum(&self, b: &DVector<f64>) -> f64 {
        b.dot(&self.center) - self.radius() * (self.cholesky.transpose() * b).norm()
    }
}
