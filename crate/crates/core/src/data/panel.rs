use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_to_quarterly, quarterly_values};
use super::impute::impute_ragged_edges;
use super::outliers::clean_outliers;
use super::transform::apply_transform;
use super::types::{BlockKey, Country, Frequency, Quarter, RawSeries, Sector};
use super::PipelineError;

fn default_impute_factors() -> usize {
    14
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// GDP growth series per country; excluded from the factor panel.
    #[serde(default)]
    pub gdp_series: BTreeMap<Country, String>,
    /// Number of principal components used to fill missing cells.
    #[serde(default = "default_impute_factors")]
    pub impute_factors: usize,
    #[serde(default = "yes")]
    pub clean_outliers: bool,
    /// Optional sample bounds; by default the panel starts at the latest
    /// first observation and ends at the latest last observation.
    #[serde(default)]
    pub start: Option<Quarter>,
    #[serde(default)]
    pub end: Option<Quarter>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gdp_series: BTreeMap::new(),
            impute_factors: default_impute_factors(),
            clean_outliers: true,
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
}

/// Standardized, complete quarterly panel with block membership per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    /// T x N, rows are quarters.
    pub observations: DMatrix<f64>,
    pub series_ids: Vec<String>,
    pub block_index: Vec<BlockKey>,
    pub column_stats: Vec<ColumnStats>,
    pub first_quarter: Quarter,
    pub last_quarter: Quarter,
}

/// GDP growth for one country, aligned to the panel quarters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdpSeries {
    pub country: Country,
    pub id: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct BuiltPanel {
    pub panel: Panel,
    pub gdp: Vec<GdpSeries>,
    /// Flagged positions (rows of the panel) per series id.
    pub outliers: Vec<(String, Vec<usize>)>,
    pub imputation_iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    first_quarter: Quarter,
    last_quarter: Quarter,
    columns: Vec<SidecarColumn>,
}

#[derive(Serialize, Deserialize)]
struct SidecarColumn {
    id: String,
    country: Country,
    sector: Sector,
    mean: f64,
    sd: f64,
}

impl Panel {
    pub fn n_obs(&self) -> usize {
        self.observations.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.observations.ncols()
    }

    pub fn quarters(&self) -> Vec<Quarter> {
        Quarter::range(self.first_quarter, self.last_quarter)
    }

    pub fn block_columns(&self, block: BlockKey) -> Vec<usize> {
        (0..self.n_series()).filter(|&j| self.block_index[j] == block).collect()
    }

    /// Undo standardization using the saved column statistics.
    pub fn destandardize(&self) -> DMatrix<f64> {
        let mut x = self.observations.clone();
        for (j, s) in self.column_stats.iter().enumerate() {
            x.column_mut(j).apply(|v| *v = *v * s.sd + s.mean);
        }
        x
    }

    /// CSV with a `quarter` column followed by one column per series.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["quarter".to_string()];
        header.extend(self.series_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, q) in self.quarters().iter().enumerate() {
            let mut rec = vec![q.to_string()];
            rec.extend(self.observations.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with block membership and column statistics.
    pub fn write_sidecar<W: Write>(&self, writer: W) -> Result<(), PipelineError> {
        let side = Sidecar {
            first_quarter: self.first_quarter,
            last_quarter: self.last_quarter,
            columns: (0..self.n_series())
                .map(|j| SidecarColumn {
                    id: self.series_ids[j].clone(),
                    country: self.block_index[j].country,
                    sector: self.block_index[j].sector,
                    mean: self.column_stats[j].mean,
                    sd: self.column_stats[j].sd,
                })
                .collect(),
        };
        serde_json::to_writer_pretty(writer, &side)?;
        Ok(())
    }

    pub fn read<R1: Read, R2: Read>(csv_reader: R1, sidecar: R2) -> Result<Panel, PipelineError> {
        let side: Sidecar = serde_json::from_reader(sidecar)?;
        let mut rdr = csv::Reader::from_reader(csv_reader);
        let header = rdr.headers()?.clone();
        let ids: Vec<String> = header.iter().skip(1).map(String::from).collect();
        if ids.len() != side.columns.len() || ids.iter().zip(&side.columns).any(|(a, c)| *a != c.id) {
            return Err(PipelineError::Parse("panel CSV header does not match sidecar".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|e| PipelineError::Parse(format!("panel value `{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
        }
        let t = rows.len();
        let expected = Quarter::range(side.first_quarter, side.last_quarter).len();
        if t != expected {
            return Err(PipelineError::Parse(format!("panel has {t} rows, span implies {expected}")));
        }
        let n = ids.len();
        Ok(Panel {
            observations: DMatrix::from_fn(t, n, |i, j| rows[i][j]),
            series_ids: ids,
            block_index: side.columns.iter().map(|c| BlockKey::new(c.country, c.sector)).collect(),
            column_stats: side.columns.iter().map(|c| ColumnStats { mean: c.mean, sd: c.sd }).collect(),
            first_quarter: side.first_quarter,
            last_quarter: side.last_quarter,
        })
    }
}

fn to_quarterly(series: &RawSeries) -> Result<Vec<(Quarter, Option<f64>)>, PipelineError> {
    series.validate()?;
    let transformed = apply_transform(series)?;
    Ok(match series.frequency {
        Frequency::Monthly => aggregate_to_quarterly(&transformed),
        Frequency::Quarterly => quarterly_values(&transformed),
    })
}

fn align(values: &[(Quarter, Option<f64>)], first: Quarter, last: Quarter) -> Vec<Option<f64>> {
    let map: BTreeMap<Quarter, Option<f64>> = values.iter().copied().collect();
    Quarter::range(first, last).into_iter().map(|q| map.get(&q).copied().flatten()).collect()
}

fn observed_bounds(values: &[(Quarter, Option<f64>)]) -> Option<(Quarter, Quarter)> {
    let mut it = values.iter().filter(|(_, v)| v.is_some()).map(|(q, _)| *q);
    let first = it.next()?;
    let last = it.next_back().unwrap_or(first);
    Some((first, last))
}

/// Transform, aggregate, align, clean, impute and standardize a series set.
///
/// Columns are ordered by sector, then country, then input order. GDP series
/// named in the config are transformed and aggregated only, and returned
/// aligned to the panel span.
pub fn build_panel(series: &[RawSeries], config: &PipelineConfig) -> Result<BuiltPanel, PipelineError> {
    let is_gdp = |s: &RawSeries| config.gdp_series.get(&s.country).is_some_and(|id| *id == s.id);

    let mut factor_series: Vec<(&RawSeries, Vec<(Quarter, Option<f64>)>)> = Vec::new();
    for s in series.iter().filter(|s| !is_gdp(s)) {
        factor_series.push((s, to_quarterly(s)?));
    }
    for sector in Sector::ALL {
        for country in Country::ALL {
            let block = BlockKey::new(country, sector);
            if !factor_series.iter().any(|(s, _)| s.block() == block) {
                return Err(PipelineError::EmptyBlock { block });
            }
        }
    }
    factor_series.sort_by_key(|(s, _)| (s.sector, s.country));

    let mut first: Option<Quarter> = None;
    let mut last: Option<Quarter> = None;
    for (s, q) in &factor_series {
        let (a, b) = observed_bounds(q).ok_or_else(|| PipelineError::InsufficientLength {
            series: s.id.clone(),
            needed: 1,
            got: 0,
        })?;
        first = Some(first.map_or(a, |f| f.max(a)));
        last = Some(last.map_or(b, |l| l.max(b)));
    }
    let first = config.start.or(first).expect("at least one series");
    let last = config.end.or(last).expect("at least one series");
    if last < first {
        return Err(PipelineError::Parse(format!("empty sample span {first}..{last}")));
    }
    let t = Quarter::range(first, last).len();
    let n = factor_series.len();

    let mut raw = DMatrix::from_element(t, n, f64::NAN);
    let mut outliers = Vec::new();
    for (j, (s, q)) in factor_series.iter().enumerate() {
        let mut col = align(q, first, last);
        if config.clean_outliers {
            let report = clean_outliers(&col).map_err(|e| match e {
                PipelineError::InsufficientLength { needed, got, .. } => {
                    PipelineError::InsufficientLength { series: s.id.clone(), needed, got }
                }
                other => other,
            })?;
            if !report.flagged.is_empty() {
                outliers.push((s.id.clone(), report.flagged));
            }
            col = report.cleaned;
        }
        for (i, v) in col.into_iter().enumerate() {
            if let Some(v) = v {
                raw[(i, j)] = v;
            }
        }
    }

    let imputed = impute_ragged_edges(&raw, config.impute_factors)?;
    let mut observations = imputed.data;
    let mut column_stats = Vec::with_capacity(n);
    for j in 0..n {
        let col = observations.column(j);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64).sqrt();
        if !(sd > 0.0) {
            return Err(PipelineError::ConstantColumn { series: factor_series[j].0.id.clone() });
        }
        observations.column_mut(j).apply(|v| *v = (*v - mean) / sd);
        column_stats.push(ColumnStats { mean, sd });
    }

    let mut gdp = Vec::new();
    for (&country, id) in &config.gdp_series {
        let s = series
            .iter()
            .find(|s| s.id == *id && s.country == country)
            .ok_or_else(|| PipelineError::MissingGdp { country, series: id.clone() })?;
        gdp.push(GdpSeries { country, id: id.clone(), values: align(&to_quarterly(s)?, first, last) });
    }

    Ok(BuiltPanel {
        panel: Panel {
            observations,
            series_ids: factor_series.iter().map(|(s, _)| s.id.clone()).collect(),
            block_index: factor_series.iter().map(|(s, _)| s.block()).collect(),
            column_stats,
            first_quarter: first,
            last_quarter: last,
        },
        gdp,
        outliers,
        imputation_iterations: imputed.iterations,
    })
}
