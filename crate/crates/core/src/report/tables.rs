//! Quantile regressions, GaR/GiS series and the table layouts written by the
//! vulnerability stage.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::artifacts::{fmt_f, fmt_opt, write_csv, write_json, ColType, FileSchema, Schema};
use super::config::RunConfig;
use super::plot::{line_chart, ridgeline};
use super::stages::ModelArtifact;
use super::ReportError;
use crate::data::{Country, Quarter};
use crate::dfm::FactorEstimates;
use crate::qr::{fit_grid, fit_qr, rearrange, tau_grid, GridFit, QRDesign, DOWNSTREAM_TAUS};
use crate::skewt::{fit_to_quantiles, SkewTFit};
use crate::stress::{
    covariance_source, deviation_summary, run_country, scenario_from_name, CountryFactors, CountryStress, DensityResult,
    QuantileModel, Scenario,
};

/// Levels reported in the Table 2 layout.
pub const TABLE2_TAUS: [f64; 3] = [0.05, 0.50, 0.95];

/// Skew-t matched to the sample quantiles of `growth` (constant-only
/// quantile regressions at the downstream levels).
pub fn unconditional_skewt(growth: &[f64]) -> Result<SkewTFit, ReportError> {
    let design = QRDesign::constant_only(DVector::from_column_slice(growth));
    let raw = DOWNSTREAM_TAUS.iter().map(|&t| fit_qr(&design, t).map(|f| f.beta[0])).collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<(f64, f64)> = DOWNSTREAM_TAUS.iter().copied().zip(rearrange(&raw)).collect();
    Ok(fit_to_quantiles(&targets)?)
}

fn grid_levels(cfg: &RunConfig) -> Vec<f64> {
    let mut taus = cfg.qr.taus.clone().unwrap_or_else(tau_grid);
    taus.extend(DOWNSTREAM_TAUS);
    taus.extend(TABLE2_TAUS);
    taus.sort_by(f64::total_cmp);
    taus.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    taus
}

fn coef_rows(country: Country, grid: &GridFit, labels: &[String], only: Option<&[f64]>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (tau, fit) in &grid.fits {
        if only.is_some_and(|o| !o.iter().any(|t| (t - tau).abs() < 1e-12)) {
            continue;
        }
        let Ok(fit) = fit else { continue };
        for (k, l) in labels.iter().enumerate() {
            rows.push(vec![
                country.to_string(),
                fmt_f(*tau),
                l.clone(),
                fmt_f(fit.beta[k]),
                fmt_f(fit.stderr[k]),
                fmt_f(fit.p_values[k]),
                fmt_opt(fit.r1),
            ]);
        }
    }
    rows
}

fn density_row(country: Country, q: Quarter, scenario: &str, d: &DensityResult) -> Vec<String> {
    let mut r = vec![country.to_string(), q.to_string(), scenario.to_string()];
    r.extend(d.quantiles.iter().map(|(_, v)| fmt_f(*v)));
    let p = d.params;
    r.push(fmt_opt(p.map(|p| p.mu)));
    r.push(fmt_opt(p.map(|p| p.sigma2)));
    r.push(fmt_opt(p.map(|p| p.lambda)));
    r.push(fmt_opt(p.map(|p| p.nu)));
    r.push(fmt_f(d.value));
    r.push(d.fallback.to_string());
    r
}

/// GiS/GaR ordering violations over all periods of one country.
pub fn ordering_violations(s: &CountryStress, tol: f64) -> usize {
    let find = |name: &str| s.scenarios.iter().find(|(n, _)| n == name).map(|(_, r)| r);
    let joint = find("joint");
    let macro_only = find("macro_only");
    let mut bad = 0;
    for (t, gar) in s.gar.iter().enumerate() {
        if let Some(j) = joint {
            for (name, res) in &s.scenarios {
                if name != "joint" && j[t].gis > res[t].gis + tol {
                    bad += 1;
                }
            }
            if j[t].gis > gar.value + tol {
                bad += 1;
            }
        }
        if let Some(m) = macro_only {
            if m[t].gis > gar.value + tol {
                bad += 1;
            }
        }
    }
    bad
}

#[derive(Debug, Serialize)]
struct CountrySummary {
    periods: usize,
    density_fallbacks: usize,
    ordering_violations: usize,
    mean_gar: f64,
    mean_gis_joint: Option<f64>,
    dim: usize,
    mesh_size: Option<usize>,
}

#[derive(Debug, Serialize)]
struct VulnerabilitySummary {
    covariance: String,
    alpha: f64,
    delta: u32,
    horizon: usize,
    scenarios: Vec<String>,
    countries: BTreeMap<Country, CountrySummary>,
}

pub fn vulnerability(
    cfg: &RunConfig,
    model: &ModelArtifact,
    est: &FactorEstimates,
    quarters: &[Quarter],
    gdp: &BTreeMap<Country, Vec<Option<f64>>>,
    dir: &Path,
) -> Result<BTreeMap<String, FileSchema>, ReportError> {
    let blocks = &model.params.blocks;
    let mut cov_name = cfg.stress.covariance.clone();
    if cov_name == "subsampled" && est.static_cov_subsampled.is_none() {
        log::warn!("subsampled covariance unavailable (subsampling skipped); using the analytic covariance");
        cov_name = "analytic".into();
    }
    let cov = covariance_source(&cov_name, est)?;
    let taus = grid_levels(cfg);
    let h = cfg.qr.horizon;

    let coef_schema = Schema::new(&[
        ("country", ColType::Str),
        ("tau", ColType::Float),
        ("regressor", ColType::Str),
        ("coefficient", ColType::Float),
        ("stderr", ColType::Float),
        ("p_value", ColType::Float),
        ("r1", ColType::OptFloat),
    ]);
    let t1_schema = Schema::new(&[
        ("country", ColType::Str),
        ("mu", ColType::Float),
        ("sigma2", ColType::Float),
        ("lambda", ColType::Float),
        ("nu", ColType::Float),
        ("residual", ColType::Float),
        ("stagnated", ColType::Bool),
    ]);
    let series_schema = Schema::new(&[
        ("country", ColType::Str),
        ("quarter", ColType::Quarter),
        ("target", ColType::Quarter),
        ("scenario", ColType::Str),
        ("gar", ColType::Float),
        ("gis", ColType::Float),
        ("q05_center", ColType::Float),
        ("q05_stressed", ColType::Float),
        ("mesh_size", ColType::Int),
        ("fallback", ColType::Bool),
    ]);
    let mut dens_cols = vec![("country", ColType::Str), ("quarter", ColType::Quarter), ("scenario", ColType::Str)];
    let q_names: Vec<String> = DOWNSTREAM_TAUS.iter().map(|t| format!("q{:02}", (t * 100.0).round() as u32)).collect();
    dens_cols.extend(q_names.iter().map(|n| (n.as_str(), ColType::Float)));
    for n in ["mu", "sigma2", "lambda", "nu"] {
        dens_cols.push((n, ColType::OptFloat));
    }
    dens_cols.push(("value", ColType::Float));
    dens_cols.push(("fallback", ColType::Bool));
    let dens_schema = Schema::new(&dens_cols);

    let (mut t1, mut coef, mut t2, mut series, mut dens, mut t3) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut summary = VulnerabilitySummary {
        covariance: cov_name.clone(),
        alpha: cfg.stress.alpha,
        delta: cfg.stress.delta,
        horizon: h,
        scenarios: Vec::new(),
        countries: BTreeMap::new(),
    };
    let mut files = BTreeMap::new();
    let mut t3_columns: Vec<String> = Vec::new();

    for country in Country::ALL {
        let growth = gdp.get(&country).ok_or_else(|| ReportError::Config(format!("no GDP series for {country}")))?;
        if growth.len() != quarters.len() {
            return Err(ReportError::Numerical(format!("{country}: {} GDP values for {} quarters", growth.len(), quarters.len())));
        }
        let observed: Vec<f64> = growth.iter().flatten().copied().collect();
        let uf = unconditional_skewt(&observed)?;
        let p = uf.params;
        t1.push(vec![country.to_string(), fmt_f(p.mu), fmt_f(p.sigma2), fmt_f(p.lambda), fmt_f(p.nu), fmt_f(uf.residual), uf.stagnated.to_string()]);

        let cf = CountryFactors::from_blocks(blocks, country);
        let fm = DMatrix::from_fn(est.factors.nrows(), cf.dim(), |t, j| est.factors[(t, cf.indices[j])]);
        let design = QRDesign::forecasting(growth, &fm, &cf.labels, h)?;
        design.check_rank()?;
        let grid = fit_grid(&design, &taus);
        for (tau, f) in &grid.fits {
            if let Err(e) = f {
                log::warn!("{country}: quantile regression at tau = {tau} failed: {e}");
            }
        }
        coef.extend(coef_rows(country, &grid, &design.labels, None));
        t2.extend(coef_rows(country, &grid, &design.labels, Some(&TABLE2_TAUS)));

        let qm = QuantileModel::from_grid(&grid, &DOWNSTREAM_TAUS)?;
        let names = cfg.scenario_names(cf.dim());
        let scenarios: Vec<Box<dyn Scenario>> = names.iter().map(|n| scenario_from_name(n, cf.dim())).collect::<Result<_, _>>()?;
        let stress = run_country(&qm, &cf, growth, &est.factors, cov.as_ref(), &scenarios, cfg.stress.alpha, cfg.stress.delta)?;
        summary.scenarios = names.clone();
        if names.len() > t3_columns.len() {
            t3_columns = names.clone();
        }

        let target = |t: usize| Quarter::from_ordinal(quarters[t].ordinal() + h as i64);
        let mut fallbacks = 0;
        for (k, &t) in stress.periods.iter().enumerate() {
            let gar = &stress.gar[k];
            fallbacks += gar.fallback as usize;
            dens.push(density_row(country, quarters[t], "baseline", gar));
            for (name, res) in &stress.scenarios {
                let r = &res[k];
                fallbacks += r.density.fallback as usize;
                series.push(vec![
                    country.to_string(),
                    quarters[t].to_string(),
                    target(t).to_string(),
                    name.clone(),
                    fmt_f(r.gar),
                    fmt_f(r.gis),
                    fmt_f(r.q05_center),
                    fmt_f(r.q05_stressed),
                    r.mesh_size.to_string(),
                    r.density.fallback.to_string(),
                ]);
                dens.push(density_row(country, quarters[t], name, &r.density));
            }
        }

        let table = deviation_summary(&stress);
        for (i, row) in table.rows.iter().enumerate() {
            let mut r = vec![country.to_string(), row.clone()];
            r.extend(table.values[i].iter().map(|v| fmt_f(*v)));
            t3.push(r);
        }

        // figures
        let labels: Vec<String> = stress.periods.iter().map(|&t| target(t).to_string()).collect();
        let gar_line: Vec<Option<f64>> = stress.gar.iter().map(|d| Some(d.value)).collect();
        let scen_line = |name: &str| -> Option<(String, Vec<Option<f64>>)> {
            stress.scenarios.iter().find(|(n, _)| n == name).map(|(n, r)| (format!("GiS {n}"), r.iter().map(|g| Some(g.gis)).collect()))
        };
        let mut lines = vec![("GaR".to_string(), gar_line.clone())];
        lines.extend(["joint", "macro_only"].iter().filter_map(|n| scen_line(n)));
        let f = format!("gar_gis_{country}.svg");
        std::fs::write(dir.join(&f), line_chart(&format!("{country}: GaR and GiS"), &labels, &lines))?;
        files.insert(f, FileSchema::Svg);
        let uni: Vec<_> = names.iter().filter(|n| n.starts_with("univariate:")).filter_map(|n| scen_line(n)).collect();
        if !uni.is_empty() {
            let mut lines = vec![("GaR".to_string(), gar_line)];
            lines.extend(uni);
            let f = format!("univariate_{country}.svg");
            std::fs::write(dir.join(&f), line_chart(&format!("{country}: univariate stress"), &labels, &lines))?;
            files.insert(f, FileSchema::Svg);
        }
        let tau_labels: Vec<String> = grid.fits.iter().map(|(t, _)| format!("{t:.2}")).collect();
        let coef_lines: Vec<(String, Vec<Option<f64>>)> = design
            .labels
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, l)| (l.clone(), grid.fits.iter().map(|(_, f)| f.as_ref().ok().map(|f| f.beta[k])).collect()))
            .collect();
        let f = format!("coefficients_{country}.svg");
        std::fs::write(dir.join(&f), line_chart(&format!("{country}: quantile regression coefficients"), &tau_labels, &coef_lines))?;
        files.insert(f, FileSchema::Svg);
        let step = (stress.periods.len() / 10).max(1);
        let fitted: Vec<(String, crate::skewt::SkewTParams)> = stress
            .periods
            .iter()
            .zip(&stress.gar)
            .step_by(step)
            .filter_map(|(&t, d)| d.params.map(|p| (target(t).to_string(), p)))
            .collect();
        if !fitted.is_empty() {
            let lo = fitted.iter().filter_map(|(_, p)| p.quantile(0.01).ok()).fold(f64::INFINITY, f64::min);
            let hi = fitted.iter().filter_map(|(_, p)| p.quantile(0.99).ok()).fold(f64::NEG_INFINITY, f64::max);
            let rows: Vec<(String, Vec<(f64, f64)>)> = fitted
                .iter()
                .map(|(l, p)| (l.clone(), (0..=120).map(|i| lo + (hi - lo) * i as f64 / 120.0).map(|x| (x, p.pdf(x))).collect()))
                .collect();
            let f = format!("density_{country}.svg");
            std::fs::write(dir.join(&f), ridgeline(&format!("{country}: predictive densities"), &rows))?;
            files.insert(f, FileSchema::Svg);
        }

        let joint = stress.scenarios.iter().find(|(n, _)| n == "joint");
        summary.countries.insert(
            country,
            CountrySummary {
                periods: stress.periods.len(),
                density_fallbacks: fallbacks,
                ordering_violations: ordering_violations(&stress, 1e-9),
                mean_gar: stress.gar.iter().map(|d| d.value).sum::<f64>() / stress.gar.len().max(1) as f64,
                mean_gis_joint: joint.map(|(_, r)| r.iter().map(|g| g.gis).sum::<f64>() / r.len().max(1) as f64),
                dim: cf.dim(),
                mesh_size: joint.and_then(|(_, r)| r.first().map(|g| g.mesh_size)),
            },
        );
    }

    let mut put = |name: &str, schema: Schema, rows: &[Vec<String>]| -> Result<(), ReportError> {
        write_csv(&dir.join(name), &schema, rows)?;
        files.insert(name.into(), FileSchema::Csv { schema });
        Ok(())
    };
    put("table1.csv", t1_schema, &t1)?;
    put("coef_grid.csv", coef_schema.clone(), &coef)?;
    put("table2.csv", coef_schema, &t2)?;
    put("gar_gis.csv", series_schema, &series)?;
    put("densities.csv", dens_schema, &dens)?;
    let mut t3_cols = vec![("country".to_string(), ColType::Str), ("factor".to_string(), ColType::Str)];
    t3_cols.extend(t3_columns.iter().map(|c| (c.clone(), ColType::Float)));
    for r in t3.iter_mut() {
        r.resize(t3_cols.len(), fmt_f(f64::NAN));
    }
    put("table3.csv", Schema { columns: t3_cols }, &t3)?;
    write_json(&dir.join("summary.json"), &summary)?;
    files.insert("summary.json".into(), FileSchema::Json);
    Ok(files)
}
