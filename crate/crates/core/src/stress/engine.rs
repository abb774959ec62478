use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::covariance::{block_diagonal_by_sector, CovarianceSource};
use super::scenario::Scenario;
use super::{CountryFactors, StressError};
use crate::data::{Country, Sector};
use crate::qr::{rearrange, GridFit, QrError};
use crate::skewt::{fit_to_quantiles, SkewTParams};

/// Level whose quantile defines GaR and GiS.
pub const TAIL_LEVEL: f64 = 0.05;

/// Quantile-regression coefficients `[const, lag, factors...]` for the tail
/// level and for the levels matched by the skew-t.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileModel {
    pub q05: Vec<f64>,
    pub levels: Vec<(f64, Vec<f64>)>,
}

fn dot(beta: &[f64], lag: f64, f: &DVector<f64>) -> f64 {
    beta[0] + beta[1] * lag + beta[2..].iter().zip(f.iter()).map(|(b, x)| b * x).sum::<f64>()
}

impl QuantileModel {
    pub fn from_grid(grid: &GridFit, levels: &[f64]) -> Result<Self, StressError> {
        let pick = |tau: f64| -> Result<Vec<f64>, StressError> {
            match grid.get(tau) {
                Some(Ok(f)) => Ok(f.beta.clone()),
                Some(Err(e)) => Err(e.clone().into()),
                None => Err(QrError::Solver(format!("quantile level {tau} was not fitted")).into()),
            }
        };
        let q05 = pick(TAIL_LEVEL)?;
        let levels = levels.iter().map(|&t| pick(t).map(|b| (t, b))).collect::<Result<_, _>>()?;
        Ok(Self { q05, levels })
    }

    pub fn n_factors(&self) -> usize {
        self.q05.len() - 2
    }

    pub fn factor_coefs05(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.q05[2..])
    }

    pub fn q05_at(&self, lag: f64, f: &DVector<f64>) -> f64 {
        dot(&self.q05, lag, f)
    }
}

/// Growth density rebuilt from the quantile regressions at one factor vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityResult {
    /// `(level, quantile)` after monotone rearrangement.
    pub quantiles: Vec<(f64, f64)>,
    pub params: Option<SkewTParams>,
    pub fit_residual: Option<f64>,
    /// 5% regression quantile.
    pub q05_regression: f64,
    /// 5% quantile of the fitted skew-t, or the regression quantile when the
    /// fit failed.
    pub value: f64,
    pub fallback: bool,
}

pub fn density_at(model: &QuantileModel, lag: f64, f: &DVector<f64>) -> DensityResult {
    let raw: Vec<f64> = model.levels.iter().map(|(_, b)| dot(b, lag, f)).collect();
    let sorted = rearrange(&raw);
    let quantiles: Vec<(f64, f64)> = model.levels.iter().map(|l| l.0).zip(sorted).collect();
    let q05 = model.q05_at(lag, f);
    match fit_to_quantiles(&quantiles).and_then(|fit| fit.params.quantile(TAIL_LEVEL).map(|q| (fit, q))) {
        Ok((fit, q)) => DensityResult {
            quantiles,
            params: Some(fit.params),
            fit_residual: Some(fit.residual),
            q05_regression: q05,
            value: q,
            fallback: false,
        },
        Err(e) => {
            log::warn!("skew-t fit failed ({e}); using the 5% regression quantile");
            DensityResult { quantiles, params: None, fit_residual: None, q05_regression: q05, value: q05, fallback: true }
        }
    }
}

/// GaR: density at the factor point estimates.
pub fn gar_at(model: &QuantileModel, lag: f64, center: &DVector<f64>) -> DensityResult {
    density_at(model, lag, center)
}

/// Inputs of one stress evaluation.
pub struct StressContext<'a> {
    pub model: &'a QuantileModel,
    pub lag: f64,
    pub center: DVector<f64>,
    /// Country factor covariance with macro/financial cross terms removed.
    pub covariance: DMatrix<f64>,
    pub sectors: &'a [Sector],
    pub alpha: f64,
    pub delta: u32,
}

impl<'a> StressContext<'a> {
    pub fn new(
        model: &'a QuantileModel,
        lag: f64,
        center: DVector<f64>,
        covariance: &DMatrix<f64>,
        sectors: &'a [Sector],
        alpha: f64,
        delta: u32,
    ) -> Result<Self, StressError> {
        let d = center.len();
        if model.n_factors() != d || sectors.len() != d || covariance.shape() != (d, d) {
            return Err(StressError::Dimension(format!(
                "{} coefficients, {} sectors and a {:?} covariance for {d} factors",
                model.n_factors(),
                sectors.len(),
                covariance.shape()
            )));
        }
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(StressError::Config(format!("stress probability {alpha} outside (0.5, 1)")));
        }
        if delta < 1 {
            return Err(StressError::Config("mesh granularity must be at least 1".into()));
        }
        let covariance = block_diagonal_by_sector(covariance, sectors);
        Ok(Self { model, lag, center, covariance, sectors, alpha, delta })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiSResult {
    pub scenario: String,
    pub gis: f64,
    pub gar: f64,
    pub q05_center: f64,
    pub q05_stressed: f64,
    pub minimizing_point: Vec<f64>,
    pub abs_deviations: Vec<f64>,
    pub mesh_size: usize,
    pub density: DensityResult,
}

/// GiS: density rebuilt at the scenario's stressed factor vector.
pub fn gis_at(ctx: &StressContext, scenario: &dyn Scenario, gar: &DensityResult) -> Result<GiSResult, StressError> {
    let (point, mesh_size) = scenario.stress_point(ctx)?;
    let density = density_at(ctx.model, ctx.lag, &point);
    Ok(GiSResult {
        scenario: scenario.name(),
        gis: density.value,
        gar: gar.value,
        q05_center: gar.q05_regression,
        q05_stressed: density.q05_regression,
        abs_deviations: (&point - &ctx.center).iter().map(|v| v.abs()).collect(),
        minimizing_point: point.iter().copied().collect(),
        mesh_size,
        density,
    })
}

/// GaR and every scenario's GiS for one country over all usable periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryStress {
    pub country: Country,
    pub labels: Vec<String>,
    /// Periods `t` (rows of the factor matrix) at which densities are built.
    pub periods: Vec<usize>,
    pub gar: Vec<DensityResult>,
    pub scenarios: Vec<(String, Vec<GiSResult>)>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_country(
    model: &QuantileModel,
    cf: &CountryFactors,
    growth: &[Option<f64>],
    factors: &DMatrix<f64>,
    cov: &dyn CovarianceSource,
    scenarios: &[Box<dyn Scenario>],
    alpha: f64,
    delta: u32,
) -> Result<CountryStress, StressError> {
    if growth.len() != factors.nrows() {
        return Err(StressError::Dimension(format!("{} growth values for {} factor rows", growth.len(), factors.nrows())));
    }
    let periods: Vec<usize> = (0..growth.len()).filter(|&t| growth[t].is_some()).collect();
    let per_t: Vec<(DensityResult, Vec<GiSResult>)> = periods
        .par_iter()
        .map(|&t| {
            let center = DVector::from_iterator(cf.dim(), cf.indices.iter().map(|&i| factors[(t, i)]));
            let lag = growth[t].expect("filtered");
            let covariance = cov.covariance(t, &cf.indices)?;
            let ctx = StressContext::new(model, lag, center, &covariance, &cf.sectors, alpha, delta)?;
            let gar = gar_at(model, lag, &ctx.center);
            let res = scenarios.iter().map(|s| gis_at(&ctx, s.as_ref(), &gar)).collect::<Result<Vec<_>, _>>()?;
            Ok((gar, res))
        })
        .collect::<Result<_, StressError>>()?;
    let mut out = CountryStress {
        country: cf.country,
        labels: cf.labels.clone(),
        periods,
        gar: Vec::with_capacity(per_t.len()),
        scenarios: scenarios.iter().map(|s| (s.name(), Vec::with_capacity(per_t.len()))).collect(),
    };
    for (gar, res) in per_t {
        out.gar.push(gar);
        for (k, r) in res.into_iter().enumerate() {
            out.scenarios[k].1.push(r);
        }
    }
    Ok(out)
}
