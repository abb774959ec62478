//! Raw series to estimation-ready quarterly panel.

mod aggregate;
mod impute;
mod io;
mod outliers;
mod panel;
mod transform;
mod types;

use chrono::NaiveDate;
use thiserror::Error;

pub use aggregate::{aggregate_to_quarterly, quarterly_values};
pub use impute::{impute_ragged_edges, Imputation, IMPUTE_MAX_ITER, IMPUTE_TOLERANCE};
pub use io::{load_series, load_series_csv, write_series_csv};
pub use outliers::{clean_outliers, OutlierReport, IQR_MULTIPLE, NEIGHBOURHOOD};
pub use panel::{build_panel, BuiltPanel, ColumnStats, GdpSeries, Panel, PipelineConfig};
pub use transform::apply_transform;
pub use types::{BlockKey, Country, Frequency, Observation, Quarter, RawSeries, Sector, TransformCode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("series `{series}` needs at least {needed} observations, got {got}")]
    InsufficientLength { series: String, needed: usize, got: usize },
    #[error("series `{series}` has a non-positive value at {date} under a log transform")]
    NonPositiveLog { series: String, date: NaiveDate },
    #[error("series `{series}` has an irregular date {date} at position {index}")]
    IrregularDates { series: String, index: usize, date: NaiveDate },
    #[error("block {block} has no series")]
    EmptyBlock { block: BlockKey },
    #[error("GDP series `{series}` for {country} not found")]
    MissingGdp { country: Country, series: String },
    #[error("imputation did not converge after {iterations} iterations (last change {last_change:e})")]
    ImputationNotConverged { iterations: usize, last_change: f64 },
    #[error("column {column} has only {observed} of {total} entries observed")]
    TooManyMissing { column: usize, observed: usize, total: usize },
    #[error("column `{series}` is constant and cannot be standardized")]
    ConstantColumn { series: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
