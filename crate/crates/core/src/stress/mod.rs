//! Growth-at-Risk and Growth-in-Stress: stressing the factor vector of one
//! country on a probability contour and rebuilding the growth density there.

pub mod contour;
pub mod covariance;
pub mod engine;
pub mod mesh;
pub mod scenario;
pub mod summary;

use thiserror::Error;

use crate::data::{Country, Sector};
use crate::dfm::{BlockStructure, FactorBlock};
use crate::qr::QrError;
use crate::skewt::SkewTError;

pub use contour::{chi2_radius2, Contour};
pub use covariance::{covariance_source, AnalyticCov, CovarianceSource, SmootherMse, SubsampledCov, COVARIANCE_SOURCES};
pub use engine::{gar_at, gis_at, run_country, CountryStress, DensityResult, GiSResult, QuantileModel, StressContext};
pub use mesh::{mesh_points, point_budget, unit_sphere_mesh};
pub use scenario::{default_scenarios, scenario_from_name, Joint, MacroOnly, Scenario, Univariate};
pub use summary::{deviation_summary, DeviationTable};

#[derive(Debug, Error)]
pub enum StressError {
    #[error("stress configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("covariance: {0}")]
    Covariance(String),
    #[error(transparent)]
    Qr(#[from] QrError),
    #[error(transparent)]
    SkewT(#[from] SkewTError),
}

/// Default contour probability.
pub const DEFAULT_ALPHA: f64 = 0.95;
/// Default mesh granularity.
pub const DEFAULT_DELTA: u32 = 8;

/// The factors entering one country's regressions, in the order global F,
/// global M, local F, local M.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryFactors {
    pub country: Country,
    /// Positions in the stacked state vector.
    pub indices: Vec<usize>,
    pub labels: Vec<String>,
    pub sectors: Vec<Sector>,
}

impl CountryFactors {
    pub fn from_blocks(blocks: &BlockStructure, country: Country) -> Self {
        let labels_all = blocks.factor_labels();
        let order = [
            (FactorBlock::Global(Sector::F), Sector::F),
            (FactorBlock::Global(Sector::M), Sector::M),
            (FactorBlock::Local(crate::data::BlockKey::new(country, Sector::F)), Sector::F),
            (FactorBlock::Local(crate::data::BlockKey::new(country, Sector::M)), Sector::M),
        ];
        let (mut indices, mut labels, mut sectors) = (Vec::new(), Vec::new(), Vec::new());
        for (block, sector) in order {
            if let Some(info) = blocks.factor_block(block) {
                for slot in info.slots() {
                    indices.push(slot);
                    labels.push(labels_all[slot].clone());
                    sectors.push(sector);
                }
            }
        }
        Self { country, indices, labels, sectors }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }
}
