use nalgebra::{DMatrix, DVector};

use super::filter::{kalman_filter, FilterOutput};
use super::{StateSpaceError, StateSpaceModel};
use crate::linalg::{pinv, right_divide_spd, symmetrize};

#[derive(Debug, Clone)]
pub struct SmootherOutput {
    /// T x k, row t is x_{t|T}.
    pub f_smoothed: DMatrix<f64>,
    /// P_{t|T}
    pub p_smoothed: Vec<DMatrix<f64>>,
    /// P_{t,t-1|T} for t = 2..T (length T-1).
    pub p_lag: Vec<DMatrix<f64>>,
    pub loglik: f64,
    pub filter: FilterOutput,
}

/// Rauch-Tung-Striebel smoother with lag-one covariances.
pub fn kalman_smoother(model: &StateSpaceModel, data: &DMatrix<f64>) -> Result<SmootherOutput, StateSpaceError> {
    let filter = kalman_filter(model, data)?;
    let t_len = data.nrows();
    let k = model.n_states();
    let mut f_smoothed = DMatrix::zeros(t_len, k);
    let mut p_smoothed = vec![DMatrix::zeros(k, k); t_len];
    let mut p_lag = vec![DMatrix::zeros(k, k); t_len.saturating_sub(1)];
    if t_len == 0 {
        return Ok(SmootherOutput { f_smoothed, p_smoothed, p_lag, loglik: filter.loglik, filter });
    }

    let last = t_len - 1;
    let mut x_next: DVector<f64> = filter.x_filt[last].clone();
    let mut p_next = filter.p_filt[last].clone();
    f_smoothed.set_row(last, &x_next.transpose());
    p_smoothed[last] = p_next.clone();

    let at = model.a.transpose();
    // J_{t-1} is needed for the lag covariance at t; iterate backwards.
    let mut gains: Vec<DMatrix<f64>> = vec![DMatrix::zeros(k, k); t_len.saturating_sub(1)];
    for t in (0..last).rev() {
        let pa = &filter.p_filt[t] * &at;
        let j = right_divide_spd(&pa, &filter.p_pred[t + 1]).unwrap_or_else(|| &pa * pinv(&filter.p_pred[t + 1]));
        let x = &filter.x_filt[t] + &j * (&x_next - &filter.x_pred[t + 1]);
        let mut p = &filter.p_filt[t] + &j * (&p_next - &filter.p_pred[t + 1]) * j.transpose();
        symmetrize(&mut p);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(StateSpaceError::NonFinite { t });
        }
        f_smoothed.set_row(t, &x.transpose());
        p_smoothed[t] = p.clone();
        gains[t] = j;
        x_next = x;
        p_next = p;
    }
    // Cov(x_t, x_{t-1} | Y) = P_{t|T} J_{t-1}'
    for t in 1..t_len {
        p_lag[t - 1] = &p_smoothed[t] * gains[t - 1].transpose();
    }
    Ok(SmootherOutput { f_smoothed, p_smoothed, p_lag, loglik: filter.loglik, filter })
}
