use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blocks::BlockStructure;
use super::init::init_pc_topdown;
use super::params::{MLDFMParams, IDIO_VAR_FLOOR};
use super::uncertainty::factor_cov_analytic;
use super::DfmError;
use crate::data::BlockKey;
use crate::linalg::{spd_inverse, symmetrize};
use crate::state_space::{kalman_smoother, SmootherOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Threshold on the relative log-likelihood change.
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iter: 1000, tol: 1e-3 }
    }
}

/// Smoothed factors and their uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEstimates {
    /// T x r, state order.
    pub factors: DMatrix<f64>,
    /// P_{t|T}
    pub mse: Vec<DMatrix<f64>>,
    /// Block-diagonal Γ̃.
    pub static_cov_analytic: DMatrix<f64>,
    /// Γ̂, when subsampling has been run.
    pub static_cov_subsampled: Option<DMatrix<f64>>,
    pub em_path: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: MLDFMParams,
    pub estimates: FactorEstimates,
    pub iterations: usize,
    pub last_delta: f64,
}

/// Relative change `|a - b| / (|a + b| / 2)`.
pub fn relative_change(prev: f64, next: f64) -> f64 {
    let den = 0.5 * (next + prev).abs();
    let num = (next - prev).abs();
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Initialize by top-down PC and iterate EM to convergence.
pub fn fit_em(x: &DMatrix<f64>, blocks: &BlockStructure, config: &EmConfig) -> Result<EmFit, DfmError> {
    let (params, _) = init_pc_topdown(x, blocks)?;
    fit_em_from(x, params, config)
}

/// EM iterations starting from given parameters.
///
/// Each iteration runs the smoother at the current parameters and records the
/// log-likelihood; it stops when the relative change falls below `tol`,
/// otherwise applies the M-step. If `max_iter` is exhausted a final smoother
/// pass is made at the last parameters and `converged` is false.
pub fn fit_em_from(x: &DMatrix<f64>, mut params: MLDFMParams, config: &EmConfig) -> Result<EmFit, DfmError> {
    params.validate()?;
    let mut path: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut last_delta = f64::INFINITY;
    let mut smoothed: Option<SmootherOutput> = None;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        let model = params.state_space()?;
        let s = kalman_smoother(&model, x)?;
        path.push(s.loglik);
        if path.len() >= 2 {
            last_delta = relative_change(path[path.len() - 2], s.loglik);
            if last_delta < config.tol {
                converged = true;
                smoothed = Some(s);
                break;
            }
        }
        params = m_step(x, &s, &params)?;
        iterations += 1;
    }
    let smoothed = match smoothed {
        Some(s) => s,
        None => {
            let s = kalman_smoother(&params.state_space()?, x)?;
            if let Some(&prev) = path.last() {
                last_delta = relative_change(prev, s.loglik);
            }
            path.push(s.loglik);
            s
        }
    };

    let mut factors = smoothed.f_smoothed;
    let mut mse = smoothed.p_smoothed;
    apply_sign_convention(&mut params, &mut factors, &mut mse);
    let static_cov_analytic = factor_cov_analytic(&params)?;
    Ok(EmFit {
        params,
        estimates: FactorEstimates {
            factors,
            mse,
            static_cov_analytic,
            static_cov_subsampled: None,
            em_path: path,
            converged,
        },
        iterations,
        last_delta,
    })
}

/// Closed-form maximization of the expected complete-data log-likelihood.
///
/// Loadings: restricted least squares of each series on its permitted
/// factors using smoothed second moments. Idiosyncratic variances: mean
/// squared smoothed residual plus the loading-weighted state covariance.
/// Transitions and innovation covariances: per factor block, from the lagged
/// smoothed moments.
pub fn m_step(x: &DMatrix<f64>, s: &SmootherOutput, params: &MLDFMParams) -> Result<MLDFMParams, DfmError> {
    let (t, n) = x.shape();
    let blocks = &params.blocks;
    let r = params.n_factors();
    let f = &s.f_smoothed;

    let mut sff = f.transpose() * f;
    for p in &s.p_smoothed {
        sff += p;
    }
    let sxf = x.transpose() * f;
    let first = f.row(0).transpose() * f.row(0) + &s.p_smoothed[0];
    let last = f.row(t - 1).transpose() * f.row(t - 1) + &s.p_smoothed[t - 1];
    let s11 = &sff - first;
    let s00 = &sff - last;
    let mut s10 = DMatrix::zeros(r, r);
    for tt in 1..t {
        s10 += f.row(tt).transpose() * f.row(tt - 1) + &s.p_lag[tt - 1];
    }

    let mut lambda = DMatrix::zeros(n, r);
    let mut idio_var = vec![0.0; n];
    let mut groups: Vec<(BlockKey, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let key = blocks.series_blocks[i];
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    for (key, members) in &groups {
        let slots = blocks.permitted_slots(members[0]);
        if slots.is_empty() {
            for &i in members {
                idio_var[i] = f64::max(x.column(i).norm_squared() / t as f64, IDIO_VAR_FLOOR);
            }
            continue;
        }
        let gram = DMatrix::from_fn(slots.len(), slots.len(), |a, b| sff[(slots[a], slots[b])]);
        let gram_inv = spd_inverse(&gram).ok_or_else(|| DfmError::SingularGram { block: key.to_string() })?;
        for &i in members {
            let rhs = nalgebra::DVector::from_fn(slots.len(), |a, _| sxf[(i, slots[a])]);
            let coef = &gram_inv * &rhs;
            let xx: f64 = x.column(i).norm_squared();
            let fitted = coef.dot(&rhs);
            let quad = coef.dot(&(&gram * &coef));
            idio_var[i] = f64::max((xx - 2.0 * fitted + quad) / t as f64, IDIO_VAR_FLOOR);
            for (a, &j) in slots.iter().enumerate() {
                lambda[(i, j)] = coef[a];
            }
        }
    }

    let mut transition = DMatrix::zeros(r, r);
    let mut sigma_u = DMatrix::zeros(r, r);
    for b in blocks.factor_blocks() {
        let (o, k) = (b.offset, b.size);
        let b10 = s10.view((o, o), (k, k)).into_owned();
        let b00 = s00.view((o, o), (k, k)).into_owned();
        let b11 = s11.view((o, o), (k, k)).into_owned();
        let inv = spd_inverse(&b00).ok_or_else(|| DfmError::SingularGram { block: b.block.to_string() })?;
        let a = &b10 * inv;
        let mut q = (b11 - &a * b10.transpose()) / t as f64;
        symmetrize(&mut q);
        transition.view_mut((o, o), (k, k)).copy_from(&a);
        sigma_u.view_mut((o, o), (k, k)).copy_from(&q);
    }

    Ok(MLDFMParams { blocks: blocks.clone(), lambda, transition, sigma_u, idio_var })
}

/// Make the largest absolute loading of every factor positive, flipping the
/// factor path, its MSE rows and columns, and the model matrices together.
pub fn apply_sign_convention(params: &mut MLDFMParams, factors: &mut DMatrix<f64>, mse: &mut [DMatrix<f64>]) {
    for j in 0..params.n_factors() {
        let col = params.lambda.column(j);
        let mut best = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            params.flip_factor(j);
            factors.column_mut(j).neg_mut();
            for p in mse.iter_mut() {
                p.row_mut(j).neg_mut();
                p.column_mut(j).neg_mut();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Country, Sector};
    use crate::dfm::simulate::{random_params, simulate_mldfm, SimulationSpec};
    use crate::state_space::FilterOutput;

    fn structure(per_block: usize) -> BlockStructure {
        let mut v = Vec::new();
        for s in Sector::ALL {
            for c in Country::ALL {
                v.extend(std::iter::repeat_n(BlockKey::new(c, s), per_block));
            }
        }
        BlockStructure::baseline(v)
    }

    fn zero_cov_smoother(f: DMatrix<f64>) -> SmootherOutput {
        let (t, r) = f.shape();
        SmootherOutput {
            f_smoothed: f,
            p_smoothed: vec![DMatrix::zeros(r, r); t],
            p_lag: vec![DMatrix::zeros(r, r); t - 1],
            loglik: 0.0,
            filter: FilterOutput { x_pred: vec![], p_pred: vec![], x_filt: vec![], p_filt: vec![], loglik: 0.0 },
        }
    }

    #[test]
    fn zero_covariance_loading_update_is_ols() {
        let blocks = structure(4);
        let p = random_params(&blocks, &SimulationSpec::default(), 1).unwrap();
        let sim = simulate_mldfm(&p, 60, 2).unwrap();
        let s = zero_cov_smoother(sim.factors.clone());
        let next = m_step(&sim.data, &s, &p).unwrap();
        let i = 30;
        let slots = blocks.permitted_slots(i);
        let z = DMatrix::from_fn(60, slots.len(), |t, a| sim.factors[(t, slots[a])]);
        let y = sim.data.column(i).into_owned();
        let ols = (z.transpose() * &z).try_inverse().unwrap() * z.transpose() * y;
        for (a, &j) in slots.iter().enumerate() {
            assert!((next.lambda[(i, j)] - ols[a]).abs() < 1e-10);
        }
        assert!(next.has_structural_zeros());
    }

    #[test]
    fn hand_computed_scalar_update() {
        // one global factor, three periods, hand sums:
        // Σ f² + P = (1 + 4 + 0.25) + (0.5 + 0.5 + 0.5) = 6.75
        // Σ x f    = 2*1 + 3*2 + (-1)*(-0.5) = 8.5
        // γ = 8.5 / 6.75
        let mut keys = Vec::new();
        for s in Sector::ALL {
            for c in Country::ALL {
                keys.extend(std::iter::repeat_n(BlockKey::new(c, s), 2));
            }
        }
        let blocks = BlockStructure::uniform(keys, 1, 0, 0, 0);
        let p = random_params(&blocks, &SimulationSpec::default(), 0).unwrap();
        let f = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -0.5]);
        let mut s = zero_cov_smoother(f);
        for pt in s.p_smoothed.iter_mut() {
            pt[(0, 0)] = 0.5;
        }
        let mut x = DMatrix::zeros(3, 16);
        x.set_column(0, &nalgebra::DVector::from_vec(vec![2.0, 3.0, -1.0]));
        let next = m_step(&x, &s, &p).unwrap();
        assert!((next.lambda[(0, 0)] - 8.5 / 6.75).abs() < 1e-12);
        // σ² = (Σx² - γ Σxf) / T = (14 - 8.5²/6.75) / 3
        assert!((next.idio_var[0] - (14.0 - 8.5 * 8.5 / 6.75) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn idio_variance_never_negative() {
        let blocks = structure(4);
        let p = random_params(&blocks, &SimulationSpec::default(), 4).unwrap();
        let sim = simulate_mldfm(&p, 40, 5).unwrap();
        let s = kalman_smoother(&p.state_space().unwrap(), &sim.data).unwrap();
        let next = m_step(&sim.data, &s, &p).unwrap();
        assert!(next.idio_var.iter().all(|&v| v >= IDIO_VAR_FLOOR));
    }

    #[test]
    fn true_parameters_are_near_fixed_point() {
        // the sample optimum gains about (#params / 2) nats over the truth,
        // so the relative change shrinks like 1 / T
        let blocks = structure(5);
        let p = random_params(&blocks, &SimulationSpec::default(), 6).unwrap();
        let sim = simulate_mldfm(&p, 2000, 7).unwrap();
        let fit = fit_em_from(&sim.data, p, &EmConfig { max_iter: 2, tol: 0.0 }).unwrap();
        let path = &fit.estimates.em_path;
        let d = relative_change(path[0], path[1]);
        assert!(d < 1e-3, "relative change {d}");
    }

    #[test]
    fn loglik_path_is_monotone() {
        for seed in 0..4u64 {
            let blocks = structure(6);
            let p = random_params(&blocks, &SimulationSpec::default(), 100 + seed).unwrap();
            let sim = simulate_mldfm(&p, 80, 200 + seed).unwrap();
            let fit = fit_em(&sim.data, &blocks, &EmConfig { max_iter: 60, tol: 1e-7 }).unwrap();
            let path = &fit.estimates.em_path;
            for w in path.windows(2) {
                assert!(w[1] >= w[0] - 1e-6 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
            }
            assert!(fit.params.has_structural_zeros());
        }
    }

    #[test]
    fn single_iteration_is_not_converged() {
        let blocks = structure(5);
        let p = random_params(&blocks, &SimulationSpec::default(), 9).unwrap();
        let sim = simulate_mldfm(&p, 50, 10).unwrap();
        let fit = fit_em(&sim.data, &blocks, &EmConfig { max_iter: 1, tol: 1e-3 }).unwrap();
        assert!(!fit.estimates.converged);
        assert_eq!(fit.estimates.em_path.len(), 2);
        assert!(fit.last_delta.is_finite());
    }

    #[test]
    fn sign_convention_makes_largest_loading_positive() {
        let blocks = structure(5);
        let p = random_params(&blocks, &SimulationSpec::default(), 11).unwrap();
        let sim = simulate_mldfm(&p, 60, 12).unwrap();
        let fit = fit_em(&sim.data, &blocks, &EmConfig::default()).unwrap();
        for j in 0..fit.params.n_factors() {
            let col = fit.params.lambda.column(j);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }
}
