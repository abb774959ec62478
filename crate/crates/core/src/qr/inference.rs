use nalgebra::DVector;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::solver::check_loss;
use super::QRDesign;
use crate::linalg::{pinv, sorted_quantile, spd_inverse};

/// Significance level entering the Hall–Sheather bandwidth.
pub const HALL_SHEATHER_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub stderr: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Estimated sparsity `1 / f(F^{-1}(τ))`.
    pub sparsity: f64,
    /// The window `τ ± h` left (0, 1) and was clipped.
    pub clipped: bool,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `n^{-1/3} z_{α/2}^{2/3} (1.5 φ(z_τ)² / (2 z_τ² + 1))^{1/3}`.
pub fn hall_sheather_bandwidth(n: usize, tau: f64, alpha: f64) -> f64 {
    let nd = std_normal();
    let z_a = nd.inverse_cdf(1.0 - alpha / 2.0);
    let z_t = nd.inverse_cdf(tau);
    let phi = nd.pdf(z_t);
    (n as f64).powf(-1.0 / 3.0) * z_a.powf(2.0 / 3.0) * (1.5 * phi * phi / (2.0 * z_t * z_t + 1.0)).powf(1.0 / 3.0)
}

/// Standard errors under iid errors: `τ(1-τ) s² (X'X)^{-1}`, with the
/// sparsity `s` from a difference quotient of the residual quantile function.
/// P-values refer `β_j / se_j` to the standard normal.
pub fn qr_stderr(design: &QRDesign, beta: &DVector<f64>, resid: &DVector<f64>, tau: f64) -> Inference {
    let n = resid.len();
    let h = hall_sheather_bandwidth(n, tau, HALL_SHEATHER_ALPHA);
    let (lo_bound, hi_bound) = (1.0 / n as f64, 1.0 - 1.0 / n as f64);
    let (mut lo, mut hi) = (tau - h, tau + h);
    let clipped = lo < lo_bound || hi > hi_bound;
    lo = lo.max(lo_bound);
    hi = hi.min(hi_bound);
    if clipped {
        log::debug!("sparsity window at tau {tau} clipped to [{lo:.4}, {hi:.4}]");
    }
    let mut sorted: Vec<f64> = resid.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let sparsity = (sorted_quantile(&sorted, hi) - sorted_quantile(&sorted, lo)) / (hi - lo);

    let xtx = design.x.transpose() * &design.x;
    let inv = spd_inverse(&xtx).unwrap_or_else(|| pinv(&xtx));
    let scale = tau * (1.0 - tau) * sparsity * sparsity;
    let stderr: Vec<f64> = (0..design.n_coef()).map(|j| (scale * inv[(j, j)]).max(0.0).sqrt()).collect();
    let p_values = stderr
        .iter()
        .zip(beta.iter())
        .map(|(&se, &b)| if se > 0.0 { normal_p_value(b / se) } else { f64::NAN })
        .collect();
    Inference { stderr, p_values, sparsity, clipped }
}

/// Two-sided p-value of `t` against the standard normal.
pub fn normal_p_value(t: f64) -> f64 {
    2.0 * (1.0 - std_normal().cdf(t.abs()))
}

/// `1 - Σ ρ_τ(v̂) / Σ ρ_τ(y - ȳ)`, with `ȳ` the sample mean of the response.
/// `None` when the response is constant.
pub fn r1_goodness(y: &DVector<f64>, resid: &DVector<f64>, tau: f64) -> Option<f64> {
    let ybar = y.mean();
    let den: f64 = y.iter().map(|&v| check_loss(v - ybar, tau)).sum();
    if den <= 0.0 {
        return None;
    }
    let num: f64 = resid.iter().map(|&u| check_loss(u, tau)).sum();
    Some(1.0 - num / den)
}
