use nalgebra::DMatrix;

use super::StressError;
use crate::data::Sector;
use crate::dfm::FactorEstimates;
use crate::linalg::submatrix;

/// Source of the factor covariance that shapes the stress contour.
pub trait CovarianceSource: Send + Sync {
    fn name(&self) -> &'static str;
    /// Covariance of the state slots `indices` at period `t`.
    fn covariance(&self, t: usize, indices: &[usize]) -> Result<DMatrix<f64>, StressError>;
}

/// Registered source names.
pub const COVARIANCE_SOURCES: [&str; 3] = ["subsampled", "analytic", "smoother_mse"];

/// Static covariance inflated for loading uncertainty.
pub struct SubsampledCov(pub DMatrix<f64>);
/// Static covariance under known loadings.
pub struct AnalyticCov(pub DMatrix<f64>);
/// Per-period smoothed state covariance.
pub struct SmootherMse(pub Vec<DMatrix<f64>>);

fn restrict(m: &DMatrix<f64>, indices: &[usize]) -> Result<DMatrix<f64>, StressError> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= m.nrows()) {
        return Err(StressError::Dimension(format!("state slot {bad} outside a {}-factor covariance", m.nrows())));
    }
    Ok(submatrix(m, indices, indices))
}

impl CovarianceSource for SubsampledCov {
    fn name(&self) -> &'static str {
        "subsampled"
    }
    fn covariance(&self, _t: usize, indices: &[usize]) -> Result<DMatrix<f64>, StressError> {
        restrict(&self.0, indices)
    }
}

impl CovarianceSource for AnalyticCov {
    fn name(&self) -> &'static str {
        "analytic"
    }
    fn covariance(&self, _t: usize, indices: &[usize]) -> Result<DMatrix<f64>, StressError> {
        restrict(&self.0, indices)
    }
}

impl CovarianceSource for SmootherMse {
    fn name(&self) -> &'static str {
        "smoother_mse"
    }
    fn covariance(&self, t: usize, indices: &[usize]) -> Result<DMatrix<f64>, StressError> {
        let p = self.0.get(t).ok_or_else(|| StressError::Dimension(format!("no smoothed covariance at period {t}")))?;
        restrict(p, indices)
    }
}

/// Look up a covariance source by name.
pub fn covariance_source(name: &str, est: &FactorEstimates) -> Result<Box<dyn CovarianceSource>, StressError> {
    match name {
        "subsampled" => est
            .static_cov_subsampled
            .clone()
            .map(|m| Box::new(SubsampledCov(m)) as Box<dyn CovarianceSource>)
            .ok_or_else(|| StressError::Covariance("subsampled covariance requested but subsampling was not run".into())),
        "analytic" => Ok(Box::new(AnalyticCov(est.static_cov_analytic.clone()))),
        "smoother_mse" => Ok(Box::new(SmootherMse(est.mse.clone()))),
        other => Err(StressError::Config(format!(
            "unknown covariance source {other:?}; expected one of {}",
            COVARIANCE_SOURCES.join(", ")
        ))),
    }
}

/// Zero the entries linking factors of different sectors.
pub fn block_diagonal_by_sector(m: &DMatrix<f64>, sectors: &[Sector]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if sectors[i] == sectors[j] { m[(i, j)] } else { 0.0 })
}
