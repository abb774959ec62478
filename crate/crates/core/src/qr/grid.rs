use rayon::prelude::*;

use super::{fit_qr, QRDesign, QRFit, QrError};

/// Quantile levels passed on to the skew-t fit.
pub const DOWNSTREAM_TAUS: [f64; 4] = [0.25, 0.50, 0.75, 0.95];

/// `0.05, 0.10, ..., 0.95`.
pub fn tau_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Independent fits over a set of quantile levels, in the order requested.
#[derive(Debug, Clone)]
pub struct GridFit {
    pub fits: Vec<(f64, Result<QRFit, QrError>)>,
}

impl GridFit {
    pub fn get(&self, tau: f64) -> Option<&Result<QRFit, QrError>> {
        self.fits.iter().find(|(t, _)| (t - tau).abs() < 1e-12).map(|(_, f)| f)
    }

    /// Fits at [`DOWNSTREAM_TAUS`], failing on the first missing or failed level.
    pub fn downstream(&self) -> Result<[&QRFit; 4], QrError> {
        let mut out = Vec::with_capacity(4);
        for tau in DOWNSTREAM_TAUS {
            match self.get(tau) {
                Some(Ok(f)) => out.push(f),
                Some(Err(e)) => return Err(e.clone()),
                None => return Err(QrError::Solver(format!("quantile level {tau} was not fitted"))),
            }
        }
        Ok([out[0], out[1], out[2], out[3]])
    }

    /// Predicted quantiles at `x` over the successful fits, in level order.
    pub fn predictions(&self, x: &[f64]) -> Vec<(f64, f64)> {
        self.fits.iter().filter_map(|(t, f)| f.as_ref().ok().map(|f| (*t, f.predict(x)))).collect()
    }
}

pub fn fit_grid(design: &QRDesign, taus: &[f64]) -> GridFit {
    let fits = taus.par_iter().map(|&tau| (tau, fit_qr(design, tau))).collect();
    GridFit { fits }
}

/// Monotone rearrangement of quantile predictions ordered by level.
pub fn rearrange(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
