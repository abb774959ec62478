use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::blocks::BlockStructure;
use super::params::MLDFMParams;
use super::DfmError;
use crate::linalg::{discrete_lyapunov, psd_cholesky};

/// Ranges for randomly drawn model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    /// Absolute loading size; signs are random.
    pub loading_abs: (f64, f64),
    pub idio_var: (f64, f64),
    /// Diagonal autoregressive coefficients.
    pub ar: (f64, f64),
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { loading_abs: (0.5, 1.5), idio_var: (0.3, 0.8), ar: (0.3, 0.8) }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// T x N
    pub data: DMatrix<f64>,
    /// T x r
    pub factors: DMatrix<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random parameters with the structural zero pattern, diagonal VAR(1)
/// blocks and unit stationary factor variances.
pub fn random_params(blocks: &BlockStructure, spec: &SimulationSpec, seed: u64) -> Result<MLDFMParams, DfmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks.n_series();
    let r = blocks.total_factors();
    let mut lambda = DMatrix::zeros(n, r);
    for i in 0..n {
        for j in blocks.permitted_slots(i) {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            lambda[(i, j)] = sign * uniform(&mut rng, spec.loading_abs);
        }
    }
    let mut transition = DMatrix::zeros(r, r);
    let mut sigma_u = DMatrix::zeros(r, r);
    for j in 0..r {
        let a = uniform(&mut rng, spec.ar);
        transition[(j, j)] = a;
        sigma_u[(j, j)] = 1.0 - a * a;
    }
    let idio_var = (0..n).map(|_| uniform(&mut rng, spec.idio_var)).collect();
    Ok(MLDFMParams { blocks: blocks.clone(), lambda, transition, sigma_u, idio_var })
}

/// Draw `t` periods from the model, starting from the stationary distribution.
pub fn simulate_mldfm(params: &MLDFMParams, t: usize, seed: u64) -> Result<Simulation, DfmError> {
    let p0 = discrete_lyapunov(&params.transition, &params.sigma_u).ok_or(DfmError::Unstable)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = params.n_factors();
    let n = params.lambda.nrows();
    let l0 = psd_cholesky(&p0);
    let lq = psd_cholesky(&params.sigma_u);
    let mut draw = |k: usize| DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut factors = DMatrix::zeros(t, r);
    let mut f = &l0 * draw(r);
    for tt in 0..t {
        if tt > 0 {
            f = &params.transition * &f + &lq * draw(r);
        }
        factors.set_row(tt, &f.transpose());
    }
    let sd: Vec<f64> = params.idio_var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut data = &factors * params.lambda.transpose();
    for tt in 0..t {
        let e = draw(n);
        for i in 0..n {
            data[(tt, i)] += sd[i] * e[i];
        }
    }
    Ok(Simulation { data, factors })
}
