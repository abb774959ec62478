//! Two-level (global and country-sector) dynamic factor model estimated by EM.

mod blocks;
mod diagnostic;
mod em;
mod init;
mod metrics;
mod params;
mod simulate;
mod uncertainty;

use thiserror::Error;

pub use blocks::{BlockStructure, FactorBlock, FactorBlockInfo};
pub use diagnostic::{idio_correlation_diagnostic, GroupSummary, IdioDiagnostic};
pub use em::{apply_sign_convention, fit_em, fit_em_from, m_step, relative_change, EmConfig, EmFit, FactorEstimates};
pub use init::{init_pc_topdown, principal_components, var1_least_squares};
pub use metrics::{block_trace_r2, trace_r2};
pub use params::{MLDFMParams, IDIO_VAR_FLOOR};
pub use simulate::{random_params, simulate_mldfm, Simulation, SimulationSpec};
pub use uncertainty::{
    factor_cov_analytic, subsample_factor_cov, subsample_fraction, subsample_sizes, SubsampleResult,
    SubsamplingConfig, MAX_DROP_SHARE,
};

use crate::state_space::StateSpaceError;

#[derive(Debug, Error)]
pub enum DfmError {
    #[error("model configuration: {0}")]
    Config(String),
    #[error("singular Gram matrix in block {block}")]
    SingularGram { block: String },
    #[error("factor transition is not stable")]
    Unstable,
    #[error("{dropped} of {total} subsampling replicates failed")]
    TooManyDropped { dropped: usize, total: usize },
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
}
