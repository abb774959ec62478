//! Factor-augmented quantile regression of next-quarter growth.

pub mod grid;
pub mod inference;
pub mod solver;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

pub use grid::{fit_grid, rearrange, tau_grid, GridFit, DOWNSTREAM_TAUS};
pub use inference::{hall_sheather_bandwidth, qr_stderr, r1_goodness, Inference, HALL_SHEATHER_ALPHA};
pub use solver::{check_loss, objective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QrError {
    #[error("quantile level {0} is outside (0, 1)")]
    InvalidTau(f64),
    #[error("{t} observations are too few for {p} coefficients (need at least {need})")]
    TooFewObservations { t: usize, p: usize, need: usize },
    #[error("design is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("design has {rows} rows but the response has {len} entries")]
    Dimension { rows: usize, len: usize },
    #[error("no usable observations after aligning the response and regressors")]
    Empty,
    #[error("linear program solver failed: {0}")]
    Solver(String),
}

/// Response and regressors aligned so that row `t` of `x` predicts `y[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QRDesign {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Index of the quarter at which each row's regressors are observed.
    pub origin: Vec<usize>,
}

impl QRDesign {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, labels: Vec<String>) -> Result<Self, QrError> {
        if x.nrows() != y.len() {
            return Err(QrError::Dimension { rows: x.nrows(), len: y.len() });
        }
        if labels.len() != x.ncols() {
            return Err(QrError::Dimension { rows: labels.len(), len: x.ncols() });
        }
        let origin = (0..y.len()).collect();
        Ok(Self { y, x, labels, origin })
    }

    pub fn constant_only(y: DVector<f64>) -> Self {
        let n = y.len();
        Self { y, x: DMatrix::from_element(n, 1, 1.0), labels: vec!["const".into()], origin: (0..n).collect() }
    }

    /// Regress `growth[t + h]` on a constant, `growth[t]` and `factors` row `t`.
    /// Quarters with a missing response or lag are skipped.
    pub fn forecasting(growth: &[Option<f64>], factors: &DMatrix<f64>, factor_labels: &[String], h: usize) -> Result<Self, QrError> {
        let t_all = growth.len();
        if factors.nrows() != t_all {
            return Err(QrError::Dimension { rows: factors.nrows(), len: t_all });
        }
        if factor_labels.len() != factors.ncols() {
            return Err(QrError::Dimension { rows: factor_labels.len(), len: factors.ncols() });
        }
        let h = h.max(1);
        let k = factors.ncols();
        let origin: Vec<usize> = (0..t_all.saturating_sub(h))
            .filter(|&t| growth[t].is_some() && growth[t + h].is_some())
            .collect();
        if origin.is_empty() {
            return Err(QrError::Empty);
        }
        let y = DVector::from_iterator(origin.len(), origin.iter().map(|&t| growth[t + h].unwrap()));
        let x = DMatrix::from_fn(origin.len(), 2 + k, |r, j| {
            let t = origin[r];
            match j {
                0 => 1.0,
                1 => growth[t].unwrap(),
                _ => factors[(t, j - 2)],
            }
        });
        let mut labels = vec!["const".to_string(), "lag".to_string()];
        labels.extend(factor_labels.iter().cloned());
        Ok(Self { y, x, labels, origin })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    /// Column means of the regressors.
    pub fn mean_regressor(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_coef(), self.x.column_iter().map(|c| c.mean()))
    }

    /// Fails with the names of the columns spanning a near-null direction.
    pub fn check_rank(&self) -> Result<(), QrError> {
        let p = self.n_coef();
        let scale: Vec<f64> = self.x.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
        let xs = DMatrix::from_fn(self.n_obs(), p, |i, j| self.x[(i, j)] / scale[j]);
        let svd = xs.svd(false, true);
        let vt = svd.v_t.as_ref().expect("requested V");
        let smax = svd.singular_values.max();
        let (imin, smin) = svd.singular_values.argmin();
        if self.n_obs() >= p && smin > 1e-10 * smax {
            return Ok(());
        }
        let null = vt.row(imin);
        let columns: Vec<String> =
            (0..p).filter(|&j| null[j].abs() > 1e-6).map(|j| self.labels[j].clone()).collect();
        Err(QrError::RankDeficient { columns })
    }
}

/// Coefficients and diagnostics of one quantile regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRFit {
    pub tau: f64,
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `None` when the response is constant.
    pub r1: Option<f64>,
    pub objective: f64,
    /// Observations interpolated by the optimal vertex.
    pub basis: Vec<usize>,
    pub sparsity: f64,
    pub bandwidth_clipped: bool,
}

impl QRFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// Minimal number of observations per coefficient.
pub const MIN_OBS_PER_COEF: usize = 3;

/// Coefficient vector minimizing the check loss, as an exact vertex solution.
pub fn solve_qr(design: &QRDesign, tau: f64) -> Result<(DVector<f64>, Vec<usize>), QrError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(QrError::InvalidTau(tau));
    }
    let (t, p) = (design.n_obs(), design.n_coef());
    let need = MIN_OBS_PER_COEF * p;
    if t < need {
        return Err(QrError::TooFewObservations { t, p, need });
    }
    design.check_rank()?;
    let start = solver::interior_point(&design.y, &design.x, tau)
        .ok_or_else(|| QrError::Solver(format!("interior point iteration broke down at tau {tau}")))?;
    solver::vertex_polish(&design.y, &design.x, tau, &start)
        .ok_or_else(|| QrError::Solver(format!("vertex search did not terminate at tau {tau}")))
}

/// Fit at one quantile with iid standard errors and the R¹ measure.
pub fn fit_qr(design: &QRDesign, tau: f64) -> Result<QRFit, QrError> {
    let (beta, basis) = solve_qr(design, tau)?;
    let resid = &design.y - &design.x * &beta;
    let inf = qr_stderr(design, &beta, &resid, tau);
    let r1 = r1_goodness(&design.y, &resid, tau);
    Ok(QRFit {
        tau,
        objective: resid.iter().map(|&u| check_loss(u, tau)).sum(),
        beta: beta.iter().copied().collect(),
        stderr: inf.stderr,
        p_values: inf.p_values,
        residuals: resid.iter().copied().collect(),
        r1,
        basis,
        sparsity: inf.sparsity,
        bandwidth_clipped: inf.clipped,
    })
}
