//! Skew-t distribution in the direct parameterization
//! `f(x) = (2/σ) t_ν(z) T_{ν+1}(λ z √((ν+1)/(ν+z²)))`, `z = (x-μ)/σ`.

pub mod bvt;
pub mod fit;
pub mod quad;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use thiserror::Error;

pub use fit::{fit_to_quantiles, SkewTFit, BASE_PROBS, EXTRA_PROBS, NU_MAX, NU_MIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkewTError {
    #[error("invalid skew-t parameters: {0}")]
    InvalidParams(String),
    #[error("probability {0} is outside (0, 1)")]
    Probability(f64),
    #[error("could not bracket the {p} quantile")]
    Bracket { p: f64 },
    #[error("invalid quantile targets: {0}")]
    Targets(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTParams {
    pub mu: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub nu: f64,
}

const QUAD_TOL: f64 = 1e-13;
const SERIES_FLOOR: f64 = 1e-8;

fn student(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("positive degrees of freedom")
}

fn integer_nu(nu: f64) -> Option<u32> {
    (nu.fract() == 0.0 && (1.0..=1000.0).contains(&nu)).then_some(nu as u32)
}

/// Density of the standardized law (μ = 0, σ = 1).
pub fn std_pdf(z: f64, lambda: f64, nu: f64) -> f64 {
    let arg = lambda * z * ((nu + 1.0) / (nu + z * z)).sqrt();
    2.0 * student(nu).pdf(z) * student(nu + 1.0).cdf(arg)
}

/// Distribution function of the standardized law. Integer `ν` uses
/// `F(z) = 2 P(X ≤ z, Y ≤ 0)` for a bivariate t with correlation `-λ/√(1+λ²)`;
/// other values integrate the density. The series cancels badly far in the
/// lower tail, where quadrature takes over.
pub fn std_cdf(z: f64, lambda: f64, nu: f64) -> f64 {
    let v = match integer_nu(nu) {
        Some(n) => {
            let delta = lambda / (1.0 + lambda * lambda).sqrt();
            let v = 2.0 * bvt::bvt_lower(n, z, 0.0, -delta);
            if v < SERIES_FLOOR {
                std_cdf_quadrature(z, lambda, nu)
            } else {
                v
            }
        }
        None => std_cdf_quadrature(z, lambda, nu),
    };
    v.clamp(0.0, 1.0)
}

/// Distribution function by adaptive quadrature of the density.
pub fn std_cdf_quadrature(z: f64, lambda: f64, nu: f64) -> f64 {
    let f = |x: f64| std_pdf(x, lambda, nu);
    if z <= 0.0 {
        quad::integrate_lower_tail(f, z, QUAD_TOL)
    } else {
        1.0 - quad::integrate_upper_tail(f, z, QUAD_TOL)
    }
}

const QUANTILE_TOL: f64 = 1e-13;

/// Quantile of the standardized law by safeguarded Newton iteration.
pub fn std_quantile(p: f64, lambda: f64, nu: f64) -> Result<f64, SkewTError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SkewTError::Probability(p));
    }
    let cdf = |z: f64| std_cdf(z, lambda, nu);
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expand = 0;
    while cdf(lo) > p {
        hi = lo;
        lo *= 2.0;
        expand += 1;
        if expand > 80 {
            return Err(SkewTError::Bracket { p });
        }
    }
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        expand += 1;
        if expand > 80 {
            return Err(SkewTError::Bracket { p });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = cdf(x) - p;
        if g.abs() < QUANTILE_TOL {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < 1e-15 * (1.0 + x.abs()) {
            return Ok(x);
        }
        let d = std_pdf(x, lambda, nu);
        let newton = x - g / d;
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(x)
}

impl SkewTParams {
    pub fn new(mu: f64, sigma2: f64, lambda: f64, nu: f64) -> Result<Self, SkewTError> {
        let p = Self { mu, sigma2, lambda, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SkewTError> {
        if !(self.mu.is_finite() && self.lambda.is_finite()) {
            return Err(SkewTError::InvalidParams("location and skewness must be finite".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(SkewTError::InvalidParams(format!("scale² {} must be positive", self.sigma2)));
        }
        if !(self.nu >= 2.0 && self.nu.is_finite()) {
            return Err(SkewTError::InvalidParams(format!("degrees of freedom {} must be at least 2", self.nu)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.sigma();
        std_pdf((x - self.mu) / s, self.lambda, self.nu) / s
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_cdf((x - self.mu) / self.sigma(), self.lambda, self.nu)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, SkewTError> {
        Ok(self.mu + self.sigma() * std_quantile(p, self.lambda, self.nu)?)
    }
}
