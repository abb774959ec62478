use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

use super::contour::Contour;
use super::engine::StressContext;
use super::mesh::mesh_points;
use super::StressError;
use crate::data::Sector;
use crate::linalg::submatrix;

/// A rule choosing the stressed factor configuration for one period.
pub trait Scenario: Send + Sync {
    fn name(&self) -> String;
    /// Positions (within the country's factor vector) moved away from the center.
    fn stressed(&self, sectors: &[Sector]) -> Vec<usize>;
    /// Stressed factor vector and the number of candidates examined.
    fn stress_point(&self, ctx: &StressContext) -> Result<(DVector<f64>, usize), StressError>;
}

/// Minimize the 5% regression quantile over the contour of the stressed
/// factors, others held at the center. Ties go to the lowest mesh index.
pub fn contour_minimizer(ctx: &StressContext, stressed: &[usize]) -> Result<(DVector<f64>, usize), StressError> {
    if stressed.is_empty() {
        return Ok((ctx.center.clone(), 0));
    }
    let sub_center = DVector::from_iterator(stressed.len(), stressed.iter().map(|&i| ctx.center[i]));
    let sub_cov = submatrix(&ctx.covariance, stressed, stressed);
    let contour = Contour::new(sub_center, sub_cov, ctx.alpha)?;
    let coefs = ctx.model.factor_coefs05();
    let b = DVector::from_iterator(stressed.len(), stressed.iter().map(|&i| coefs[i]));
    let points = mesh_points(&contour, ctx.delta);
    let mut best = (f64::INFINITY, 0usize);
    for (k, p) in points.iter().enumerate() {
        let v = b.dot(p);
        if v < best.0 {
            best = (v, k);
        }
    }
    let mut point = ctx.center.clone();
    for (j, &i) in stressed.iter().enumerate() {
        point[i] = points[best.1][j];
    }
    Ok((point, points.len()))
}

/// All factors stressed jointly.
pub struct Joint;
/// Macro factors stressed, financial factors at the center.
pub struct MacroOnly;
/// One factor moved to its one-sided marginal quantile, in the direction
/// that lowers the 5% regression quantile.
pub struct Univariate(pub usize);

impl Scenario for Joint {
    fn name(&self) -> String {
        "joint".into()
    }
    fn stressed(&self, sectors: &[Sector]) -> Vec<usize> {
        (0..sectors.len()).collect()
    }
    fn stress_point(&self, ctx: &StressContext) -> Result<(DVector<f64>, usize), StressError> {
        contour_minimizer(ctx, &self.stressed(ctx.sectors))
    }
}

impl Scenario for MacroOnly {
    fn name(&self) -> String {
        "macro_only".into()
    }
    fn stressed(&self, sectors: &[Sector]) -> Vec<usize> {
        (0..sectors.len()).filter(|&i| sectors[i] == Sector::M).collect()
    }
    fn stress_point(&self, ctx: &StressContext) -> Result<(DVector<f64>, usize), StressError> {
        contour_minimizer(ctx, &self.stressed(ctx.sectors))
    }
}

impl Scenario for Univariate {
    fn name(&self) -> String {
        format!("univariate:{}", self.0)
    }
    fn stressed(&self, _sectors: &[Sector]) -> Vec<usize> {
        vec![self.0]
    }
    fn stress_point(&self, ctx: &StressContext) -> Result<(DVector<f64>, usize), StressError> {
        let k = self.0;
        if k >= ctx.center.len() {
            return Err(StressError::Config(format!("univariate factor {k} outside a {}-factor vector", ctx.center.len())));
        }
        let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(ctx.alpha);
        let sd = ctx.covariance[(k, k)].max(0.0).sqrt();
        let b = ctx.model.factor_coefs05()[k];
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut point = ctx.center.clone();
        point[k] -= sign * z * sd;
        Ok((point, 2))
    }
}

/// Look up a scenario: `joint`, `macro_only` or `univariate:<k>`.
pub fn scenario_from_name(name: &str, dim: usize) -> Result<Box<dyn Scenario>, StressError> {
    match name {
        "joint" => Ok(Box::new(Joint)),
        "macro_only" => Ok(Box::new(MacroOnly)),
        other => {
            let k = other
                .strip_prefix("univariate:")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| StressError::Config(format!("unknown scenario {other:?}; expected joint, macro_only or univariate:<k>")))?;
            if k >= dim {
                return Err(StressError::Config(format!("scenario {other:?} refers to factor {k} of {dim}")));
            }
            Ok(Box::new(Univariate(k)))
        }
    }
}

/// Joint, macro-only and one univariate scenario per factor.
pub fn default_scenarios(dim: usize) -> Vec<Box<dyn Scenario>> {
    let mut v: Vec<Box<dyn Scenario>> = vec![Box::new(Joint), Box::new(MacroOnly)];
    v.extend((0..dim).map(|k| Box::new(Univariate(k)) as Box<dyn Scenario>));
    v
}
