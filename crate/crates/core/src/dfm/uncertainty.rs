use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockStructure, FactorBlock};
use super::em::{fit_em, EmConfig, EmFit};
use super::params::MLDFMParams;
use super::DfmError;
use crate::data::{BlockKey, Country, Sector};
use crate::linalg::{procrustes, spd_inverse};

/// Largest share of replicates that may fail before subsampling gives up.
pub const MAX_DROP_SHARE: f64 = 0.10;

/// Block-diagonal factor covariance under cross-sectionally uncorrelated
/// idiosyncratic errors: `(N_b^{-1} Σ_i λ_i λ_i' / σ²_i)^{-1}` per block.
pub fn factor_cov_analytic(params: &MLDFMParams) -> Result<DMatrix<f64>, DfmError> {
    let r = params.n_factors();
    let mut out = DMatrix::zeros(r, r);
    for b in params.blocks.factor_blocks() {
        let mut inner = DMatrix::zeros(b.size, b.size);
        for &i in &b.series {
            let l = params.lambda.view((i, b.offset), (1, b.size)).transpose();
            inner += &l * l.transpose() / params.idio_var[i];
        }
        inner /= b.series.len() as f64;
        let inv = spd_inverse(&inner).ok_or_else(|| DfmError::SingularGram { block: b.block.to_string() })?;
        out.view_mut((b.offset, b.offset), (b.size, b.size)).copy_from(&inv);
    }
    Ok(out)
}

/// Share of each block's series kept in a subsample:
/// `1 - 235/(N+25)² - 0.2 √N / T - r/(N T)`.
pub fn subsample_fraction(n: usize, t: usize, r_local: usize) -> f64 {
    let (n, t) = (n as f64, t as f64);
    1.0 - 235.0 / (n + 25.0).powi(2) - 0.2 * n.sqrt() / t - r_local as f64 / (n * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsamplingConfig {
    pub replications: usize,
    pub seed: u64,
    /// Replace the data-driven fraction by a fixed share of every block.
    pub fraction_override: Option<f64>,
    pub em: EmConfig,
}

impl Default for SubsamplingConfig {
    fn default() -> Self {
        Self { replications: 199, seed: 0, fraction_override: None, em: EmConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleResult {
    /// Γ̂ = Γ̃ + correction.
    pub gamma_hat: DMatrix<f64>,
    pub gamma_tilde: DMatrix<f64>,
    pub correction: DMatrix<f64>,
    /// Columns drawn per country-sector block.
    pub n_star: Vec<(BlockKey, usize)>,
    pub kept: usize,
    pub dropped: usize,
}

/// Per-block subsample sizes.
pub fn subsample_sizes(blocks: &BlockStructure, t: usize, fraction_override: Option<f64>) -> Result<Vec<(BlockKey, usize)>, DfmError> {
    let mut out = Vec::new();
    for s in Sector::ALL {
        for c in Country::ALL {
            let key = BlockKey::new(c, s);
            let n = blocks.series_blocks.iter().filter(|b| **b == key).count();
            let r_local = blocks.r_local(key);
            let p = fraction_override.unwrap_or_else(|| subsample_fraction(n, t, r_local));
            if !(p > 0.0 && p <= 1.0) {
                return Err(DfmError::Config(format!("subsample fraction {p} for block {key} is outside (0, 1]")));
            }
            let n_star = (p * n as f64).round() as usize;
            let need = blocks.r_global(s) + r_local + 1;
            if n_star < need {
                return Err(DfmError::Config(format!(
                    "block {key}: subsample of {n_star} series is too small for {need} - 1 factors"
                )));
            }
            out.push((key, n_star));
        }
    }
    Ok(out)
}

/// Subsampling estimate of the factor covariance that accounts for loading
/// estimation error.
///
/// Replicate `b` draws its columns with a generator seeded by `seed` on
/// stream `b`, so the result does not depend on the execution order of the
/// parallel replicates. Replicate factors are rotated onto the full-sample
/// factors block by block before deviations are accumulated.
pub fn subsample_factor_cov(x: &DMatrix<f64>, full: &EmFit, cfg: &SubsamplingConfig) -> Result<SubsampleResult, DfmError> {
    let blocks = &full.params.blocks;
    let t = x.nrows();
    let sizes = subsample_sizes(blocks, t, cfg.fraction_override)?;
    let info = blocks.factor_blocks();
    let f_full = &full.estimates.factors;

    let replicate = |b: usize| -> Option<Vec<DMatrix<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64);
        let mut cols: Vec<usize> = Vec::new();
        for &(key, n_star) in &sizes {
            let members: Vec<usize> = (0..blocks.n_series()).filter(|&i| blocks.series_blocks[i] == key).collect();
            let picked = sample(&mut rng, members.len(), n_star);
            cols.extend(picked.iter().map(|k| members[k]));
        }
        cols.sort_unstable();
        let sub_x = x.select_columns(&cols);
        let sub_blocks = blocks.restrict(&cols);
        let fit = fit_em(&sub_x, &sub_blocks, &cfg.em).ok()?;
        if !fit.estimates.converged {
            return None;
        }
        let fb = &fit.estimates.factors;
        Some(
            info.iter()
                .map(|blk| {
                    let est = fb.columns(blk.offset, blk.size).into_owned();
                    let target = f_full.columns(blk.offset, blk.size).into_owned();
                    let rot = procrustes(&est, &target);
                    let d = est * rot - &target;
                    d.transpose() * d
                })
                .collect(),
        )
    };

    let results: Vec<Option<Vec<DMatrix<f64>>>> = (0..cfg.replications).into_par_iter().map(replicate).collect();
    let dropped = results.iter().filter(|r| r.is_none()).count();
    let kept = results.len() - dropped;
    if kept == 0 || dropped as f64 > MAX_DROP_SHARE * cfg.replications as f64 {
        return Err(DfmError::TooManyDropped { dropped, total: cfg.replications });
    }

    let r = full.params.n_factors();
    let mut correction = DMatrix::zeros(r, r);
    for (k, blk) in info.iter().enumerate() {
        let mut sum = DMatrix::zeros(blk.size, blk.size);
        for rep in results.iter().flatten() {
            sum += &rep[k];
        }
        let (n_star, n) = match blk.block {
            FactorBlock::Global(s) => sizes
                .iter()
                .filter(|(key, _)| key.sector == s)
                .fold((0, 0), |(a, b), (key, ns)| (a + ns, b + blocks.series_blocks.iter().filter(|x| *x == key).count())),
            FactorBlock::Local(key) => {
                let ns = sizes.iter().find(|(k, _)| *k == key).map(|x| x.1).unwrap_or(0);
                (ns, blocks.series_blocks.iter().filter(|x| **x == key).count())
            }
        };
        let scale = n_star as f64 / (n as f64 * kept as f64 * t as f64);
        correction.view_mut((blk.offset, blk.offset), (blk.size, blk.size)).copy_from(&(sum * scale));
    }
    let gamma_tilde = full.estimates.static_cov_analytic.clone();
    Ok(SubsampleResult {
        gamma_hat: &gamma_tilde + &correction,
        gamma_tilde,
        correction,
        n_star: sizes,
        kept,
        dropped,
    })
}
