use nalgebra::DMatrix;

use super::PipelineError;

pub const IMPUTE_TOLERANCE: f64 = 1e-6;
pub const IMPUTE_MAX_ITER: usize = 500;

#[derive(Debug, Clone)]
pub struct Imputation {
    /// Completed matrix, in the units of the input.
    pub data: DMatrix<f64>,
    pub iterations: usize,
    pub last_change: f64,
}

/// Fill missing cells (NaN) by iterated principal-component fits.
///
/// Each sweep standardizes the current completed matrix, fits an
/// `n_factors` PC approximation, and overwrites only the missing cells with
/// the fitted values mapped back to the original units. Observed cells are
/// copied through untouched.
pub fn impute_ragged_edges(data: &DMatrix<f64>, n_factors: usize) -> Result<Imputation, PipelineError> {
    let (t, n) = data.shape();
    let missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..t).map(move |i| (i, j)))
        .filter(|&(i, j)| data[(i, j)].is_nan())
        .collect();
    if missing.is_empty() {
        return Ok(Imputation { data: data.clone(), iterations: 0, last_change: 0.0 });
    }

    let mut x = data.clone();
    for j in 0..n {
        let observed: Vec<f64> = data.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
        if 2 * observed.len() < t {
            return Err(PipelineError::TooManyMissing {
                column: j,
                observed: observed.len(),
                total: t,
            });
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        for i in 0..t {
            if x[(i, j)].is_nan() {
                x[(i, j)] = mean;
            }
        }
    }

    let rank = n_factors.min(t).min(n);
    let mut last_change = f64::INFINITY;
    for iter in 1..=IMPUTE_MAX_ITER {
        let fitted = pc_fit(&x, rank);
        last_change = 0.0;
        for &(i, j) in &missing {
            last_change = f64::max(last_change, (fitted[(i, j)] - x[(i, j)]).abs());
            x[(i, j)] = fitted[(i, j)];
        }
        if last_change < IMPUTE_TOLERANCE {
            return Ok(Imputation { data: x, iterations: iter, last_change });
        }
    }
    Err(PipelineError::ImputationNotConverged { iterations: IMPUTE_MAX_ITER, last_change })
}

/// Rank-`r` PC reconstruction of `x` after column standardization, mapped back
/// to the original units.
pub(crate) fn pc_fit(x: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (t, n) = x.shape();
    let mut z = x.clone();
    let mut stats = Vec::with_capacity(n);
    for j in 0..n {
        let col = x.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..t {
            z[(i, j)] = (x[(i, j)] - mean) / sd;
        }
        stats.push((mean, sd));
    }
    let mut fit = DMatrix::zeros(t, n);
    if r > 0 {
        let svd = z.svd(true, true);
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for &k in order.iter().take(r) {
            let s = svd.singular_values[k];
            fit += (u.column(k) * s) * vt.row(k);
        }
    }
    for j in 0..n {
        let (mean, sd) = stats[j];
        for i in 0..t {
            fit[(i, j)] = fit[(i, j)] * sd + mean;
        }
    }
    fit
}
