use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{StateSpaceError, StateSpaceModel};
use crate::linalg::symmetrize;

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// x_{t|t-1}
    pub x_pred: Vec<DVector<f64>>,
    /// P_{t|t-1}
    pub p_pred: Vec<DMatrix<f64>>,
    /// x_{t|t}
    pub x_filt: Vec<DVector<f64>>,
    /// P_{t|t}
    pub p_filt: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

/// Kalman filter with row deletion for missing entries.
///
/// The measurement update uses the information form, which needs only k x k
/// solves because R is diagonal:
/// `P_{t|t} = P (I + C P)^{-1}` with `C = Λ' R^{-1} Λ` over observed rows.
pub fn kalman_filter(model: &StateSpaceModel, data: &DMatrix<f64>) -> Result<FilterOutput, StateSpaceError> {
    let (t_len, n) = data.shape();
    if n != model.n_obs() {
        return Err(StateSpaceError::Dimension(format!(
            "data has {n} columns, model has {} observation rows",
            model.n_obs()
        )));
    }
    let k = model.n_states();
    let lambda = &model.lambda;
    let rinv: DVector<f64> = model.r.map(|v| 1.0 / v);
    let log_r: Vec<f64> = model.r.iter().map(|v| v.ln()).collect();
    let full_c = weighted_gram(lambda, &rinv, &(0..n).collect::<Vec<_>>());
    let eye = DMatrix::<f64>::identity(k, k);

    let mut out = FilterOutput {
        x_pred: Vec::with_capacity(t_len),
        p_pred: Vec::with_capacity(t_len),
        x_filt: Vec::with_capacity(t_len),
        p_filt: Vec::with_capacity(t_len),
        loglik: 0.0,
    };
    let mut x = model.x0.clone();
    let mut p = model.p0.clone();
    let mut observed: Vec<usize> = Vec::with_capacity(n);

    for t in 0..t_len {
        if t > 0 {
            x = &model.a * &out.x_filt[t - 1];
            p = &model.a * &out.p_filt[t - 1] * model.a.transpose() + &model.q;
            symmetrize(&mut p);
        }
        out.x_pred.push(x.clone());
        out.p_pred.push(p.clone());

        observed.clear();
        observed.extend((0..n).filter(|&i| !data[(t, i)].is_nan()));
        if observed.is_empty() {
            out.x_filt.push(x.clone());
            out.p_filt.push(p.clone());
            continue;
        }

        // innovation v = y - Λ x over observed rows; b = Λ' R^{-1} v
        let mut b = DVector::<f64>::zeros(k);
        let mut quad_r = 0.0;
        let mut log_det_r = 0.0;
        for &i in &observed {
            let v = data[(t, i)] - lambda.row(i).dot(&x.transpose());
            let w = v * rinv[i];
            quad_r += v * w;
            log_det_r += log_r[i];
            b.axpy(w, &lambda.row(i).transpose(), 1.0);
        }
        let c = if observed.len() == n { full_c.clone() } else { weighted_gram(lambda, &rinv, &observed) };

        // (I + P C) X' = P  gives  X = P (I + C P)^{-1}
        let m = &eye + &p * &c;
        let lu = m.clone().lu();
        let log_det_m = {
            let d = lu.determinant();
            if !(d > 0.0) || !d.is_finite() {
                return Err(StateSpaceError::SingularInnovation { t });
            }
            d.ln()
        };
        let mut p_upd = lu.solve(&p).ok_or(StateSpaceError::SingularInnovation { t })?;
        symmetrize(&mut p_upd);
        let gain_v = &p_upd * &b;
        let quad = quad_r - b.dot(&gain_v);
        let x_upd = &x + gain_v;

        let ll = -0.5 * (observed.len() as f64 * (2.0 * PI).ln() + log_det_r + log_det_m + quad);
        if !ll.is_finite() || x_upd.iter().any(|v| !v.is_finite()) {
            return Err(StateSpaceError::NonFinite { t });
        }
        out.loglik += ll;
        out.x_filt.push(x_upd);
        out.p_filt.push(p_upd);
    }
    Ok(out)
}

/// `Λ[rows]' diag(w[rows]) Λ[rows]`
fn weighted_gram(lambda: &DMatrix<f64>, w: &DVector<f64>, rows: &[usize]) -> DMatrix<f64> {
    let k = lambda.ncols();
    let lw = DMatrix::from_fn(rows.len(), k, |i, j| lambda[(rows[i], j)] * w[rows[i]]);
    let l = DMatrix::from_fn(rows.len(), k, |i, j| lambda[(rows[i], j)]);
    let mut c = l.transpose() * lw;
    symmetrize(&mut c);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, q: f64, r: f64, x0: f64, p0: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, q),
            DVector::from_element(1, r),
            DVector::from_element(1, x0),
            DMatrix::from_element(1, 1, p0),
        )
        .unwrap()
    }

    #[test]
    fn local_level_one_step() {
        let m = scalar(1.0, 1.0, 1.0, 0.0, 1.0);
        let f = kalman_filter(&m, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        // closed-form scalar recursion: gain = P0 / (P0 + R)
        let gain = 1.0 / (1.0 + 1.0);
        assert!((f.x_filt[0][0] - gain * 1.0).abs() < 1e-15);
        assert!((f.p_filt[0][(0, 0)] - (1.0 - gain) * 1.0).abs() < 1e-15);
        assert_eq!(f.x_filt[0][0], 0.5);
        assert_eq!(f.p_filt[0][(0, 0)], 0.5);
    }

    #[test]
    fn near_noiseless_identity_tracks_data() {
        let y = 2.75;
        let m = scalar(1.0, 0.0, 1e-12, y, 1.0);
        let data = DMatrix::from_element(12, 1, y);
        let f = kalman_filter(&m, &data).unwrap();
        for t in 0..12 {
            assert!((f.x_filt[t][0] - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_measurement_variance_rejected() {
        let err = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, StateSpaceError::NonPositiveVariance { index: 0, .. }));
    }

    #[test]
    fn white_noise_loglik() {
        let n = 3;
        let m = StateSpaceModel::new(
            DMatrix::zeros(n, 1),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(n, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let data = DMatrix::from_fn(5, n, |i, j| (i as f64 - 2.0) * 0.7 + j as f64 * 0.3);
        let f = kalman_filter(&m, &data).unwrap();
        let direct: f64 = data.iter().map(|y| -0.5 * (2.0 * PI).ln() - 0.5 * y * y).sum();
        assert!((f.loglik - direct).abs() < 1e-12);
    }

    #[test]
    fn all_missing_step_is_pure_prediction() {
        let m = scalar(0.9, 0.5, 1.0, 0.0, 1.0);
        let mut data = DMatrix::from_element(3, 1, 1.0);
        data[(1, 0)] = f64::NAN;
        let f = kalman_filter(&m, &data).unwrap();
        assert_eq!(f.x_filt[1], f.x_pred[1]);
        assert_eq!(f.p_filt[1], f.p_pred[1]);
    }
}
