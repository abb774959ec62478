//! Synthetic input data drawn from a baseline two-level factor model, with
//! GDP growth depending on each country's factors through location and
//! scale.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ReportError;
use crate::data::{write_series_csv, BlockKey, Country, Frequency, Observation, Quarter, RawSeries, Sector, TransformCode};
use crate::dfm::{random_params, simulate_mldfm, BlockStructure, MLDFMParams, SimulationSpec};
use crate::stress::CountryFactors;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub per_block: usize,
    pub quarters: usize,
    pub start: Quarter,
    pub seed: u64,
    /// GDP location coefficients on (global F, global M, local F, local M...).
    pub location: Vec<f64>,
    /// Log-scale coefficients on the same factors.
    pub log_scale: Vec<f64>,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            per_block: 6,
            quarters: 120,
            start: Quarter::new(1990, 1),
            seed: 7,
            location: vec![0.15, 0.45, 0.1, 0.3, 0.2],
            log_scale: vec![-0.3, -0.1, -0.2, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub series: Vec<RawSeries>,
    pub gdp_ids: BTreeMap<Country, String>,
    pub params: MLDFMParams,
    /// True factors, one row per quarter.
    pub factors: DMatrix<f64>,
}

fn quarter_date(q: Quarter, month_in_quarter: u32) -> NaiveDate {
    let first = NaiveDate::from_ymd_opt(q.year, 1, 1).expect("valid year");
    let m = (q.q as u32 - 1) * 3 + month_in_quarter;
    NaiveDate::from_ymd_opt(first.year(), m + 1, 1).expect("valid month")
}

fn prev(q: Quarter) -> Quarter {
    Quarter::from_ordinal(q.ordinal() - 1)
}

pub fn synthetic_fixture(spec: &FixtureSpec) -> Result<Fixture, ReportError> {
    let keys: Vec<BlockKey> = Sector::ALL
        .iter()
        .flat_map(|&s| Country::ALL.iter().map(move |&c| BlockKey::new(c, s)))
        .flat_map(|k| std::iter::repeat_n(k, spec.per_block))
        .collect();
    let blocks = BlockStructure::baseline(keys.clone());
    let params = random_params(&blocks, &SimulationSpec::default(), spec.seed)?;
    let sim = simulate_mldfm(&params, spec.quarters, spec.seed.wrapping_add(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
    let quarters: Vec<Quarter> = (0..spec.quarters as i64).map(|k| Quarter::from_ordinal(spec.start.ordinal() + k)).collect();

    let mut series = Vec::new();
    for (j, key) in keys.iter().enumerate() {
        let mut x: Vec<f64> = sim.data.column(j).iter().copied().collect();
        // isolated spikes for the outlier rule
        if j == 3 || j == 20 {
            x[spec.quarters / 2] += 60.0;
        }
        let id = format!("{}_{}_{:02}", key.country, key.sector, j % spec.per_block + 1);
        // ragged end for every fifth series
        let cut = if j % 5 == 4 { 1 + j % 2 } else { 0 };
        let keep = |t: usize| t + cut < spec.quarters;
        let (frequency, transform, observations) = match j % spec.per_block {
            0 => {
                let mut obs = Vec::new();
                for (t, &q) in quarters.iter().enumerate() {
                    for m in 0..3 {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        obs.push(Observation { date: quarter_date(q, m), value: keep(t).then_some(x[t] + 0.1 * noise) });
                    }
                }
                (Frequency::Monthly, 0, obs)
            }
            k if k % 2 == 1 => {
                let mut level = 0.0;
                let mut obs = vec![Observation { date: quarter_date(prev(spec.start), 2), value: Some(level) }];
                for (t, &q) in quarters.iter().enumerate() {
                    level += x[t];
                    obs.push(Observation { date: quarter_date(q, 2), value: keep(t).then_some(level) });
                }
                (Frequency::Quarterly, 4, obs)
            }
            _ => {
                let mut log_level: f64 = 4.6;
                let mut obs = vec![Observation { date: quarter_date(prev(spec.start), 2), value: Some(log_level.exp()) }];
                for (t, &q) in quarters.iter().enumerate() {
                    log_level += x[t] / 100.0;
                    obs.push(Observation { date: quarter_date(q, 2), value: keep(t).then_some(log_level.exp()) });
                }
                (Frequency::Quarterly, 2, obs)
            }
        };
        series.push(RawSeries {
            id,
            country: key.country,
            sector: key.sector,
            frequency,
            transform: TransformCode::new(transform)?,
            observations,
        });
    }

    let mut gdp_ids = BTreeMap::new();
    for country in Country::ALL {
        let cf = CountryFactors::from_blocks(&blocks, country);
        let mut y = vec![0.5; spec.quarters];
        for t in 1..spec.quarters {
            let f: Vec<f64> = cf.indices.iter().map(|&i| sim.factors[(t - 1, i)]).collect();
            let loc: f64 = spec.location.iter().zip(&f).map(|(a, b)| a * b).sum();
            let log_s: f64 = spec.log_scale.iter().zip(&f).map(|(a, b)| a * b).sum();
            let e: f64 = StandardNormal.sample(&mut rng);
            y[t] = 0.4 + 0.25 * y[t - 1] + loc + 0.6 * log_s.exp() * e;
        }
        let id = format!("GDP_{country}");
        series.push(RawSeries {
            id: id.clone(),
            country,
            sector: Sector::M,
            frequency: Frequency::Quarterly,
            transform: TransformCode::new(0)?,
            observations: quarters
                .iter()
                .zip(&y)
                .map(|(&q, &v)| Observation { date: quarter_date(q, 2), value: Some(v) })
                .collect(),
        });
        gdp_ids.insert(country, id);
    }
    Ok(Fixture { series, gdp_ids, params, factors: sim.factors })
}

/// Write `series.csv` and a matching `config.toml` into `dir`; returns the
/// config path.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(dir)?;
    let fx = synthetic_fixture(spec)?;
    write_series_csv(std::fs::File::create(dir.join("series.csv"))?, &fx.series)?;
    let gdp: String = fx.gdp_ids.iter().map(|(c, id)| format!("{c} = \"{id}\"\n")).collect();
    let config = format!(
        "output = \"out\"\n\n[data]\npath = \"series.csv\"\n\n[pipeline]\nimpute_factors = 8\n\n[pipeline.gdp_series]\n{gdp}\n\
         [em]\nmax_iter = 1000\ntol = 1e-3\n\n[subsampling]\nreplications = 199\nseed = {}\n\n\
         [qr]\nhorizon = 1\n\n[stress]\nalpha = 0.95\ndelta = 8\nscenarios = [\"joint\", \"macro_only\", \"univariate\"]\ncovariance = \"subsampled\"\n",
        spec.seed
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config)?;
    Ok(path)
}
