//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Replace `m` by `(m + m')/2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = s.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigen().eigenvalues.min()
}

/// True when `m` is symmetric PSD up to `tol`.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    let asym = (m - m.transpose()).abs().max();
    asym <= tol.max(1e-12) * (1.0 + m.abs().max()) && min_eigenvalue(m) >= -tol
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Stationary covariance `P = A P A' + Q` by the doubling iteration.
///
/// Returns `None` when `A` is not stable enough for the series to converge.
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if spectral_radius(a) >= 1.0 - 1e-6 {
        return None;
    }
    let mut p = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let incr = &ak * &p * ak.transpose();
        p += &incr;
        ak = &ak * &ak;
        if incr.abs().max() <= 1e-15 * (1.0 + p.abs().max()) {
            break;
        }
    }
    symmetrize(&mut p);
    Some(p)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let chol = s.cholesky()?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// Solve `x m = b` for `x` (row-oriented right division) with `m` symmetric
/// positive definite.
pub fn right_divide_spd(b: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let chol = s.cholesky()?;
    // x m = b  <=>  m x' = b'
    Some(chol.solve(&b.transpose()).transpose())
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (m.nrows().max(m.ncols()) as f64);
    svd.pseudo_inverse(eps).unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// Orthogonal matrix `R` minimising `||source R - target||_F`.
pub fn procrustes(source: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let c = source.transpose() * target;
    let svd = c.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => u * vt,
        _ => DMatrix::identity(source.ncols(), source.ncols()),
    }
}

/// Extract the sub-matrix `m[rows, cols]`.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Lower-triangular Cholesky factor of a PSD matrix, tolerating exact zeros
/// on the diagonal (degenerate directions get a zero column).
pub fn psd_cholesky(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-14 * (1.0 + m[(j, j)].abs()) {
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    l
}

/// Linear-interpolation sample quantile of already sorted data
/// (the "type 7" convention).
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of an unsorted slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted_quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar_matches_closed_form() {
        let a = DMatrix::from_element(1, 1, 0.8);
        let q = DMatrix::from_element(1, 1, 0.36);
        let p = discrete_lyapunov(&a, &q).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unit_root() {
        let a = DMatrix::identity(2, 2);
        assert!(discrete_lyapunov(&a, &DMatrix::identity(2, 2)).is_none());
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let f = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0, 2.0]);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated = &f * &rot;
        let r = procrustes(&rotated, &f);
        assert!((rotated * r - f).abs().max() < 1e-12);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&v, 0.25), 1.75);
        assert_eq!(sorted_quantile(&v, 0.75), 3.25);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn psd_cholesky_handles_zero_block() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let l = psd_cholesky(&m);
        assert!((&l * l.transpose() - m).abs().max() < 1e-14);
    }
}

/// Serde helpers that write a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        (m.ncols(), rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let (ncols, rows): (usize, Vec<Vec<f64>>) = Deserialize::deserialize(d)?;
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

/// Serde helpers for a list of matrices.
pub mod matrix_list {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::matrix_rows")] DMatrix<f64>);

    pub fn serialize<S: Serializer>(m: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let w: Vec<Wrapped> = m.iter().cloned().map(Wrapped).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let w: Vec<Wrapped> = Deserialize::deserialize(d)?;
        Ok(w.into_iter().map(|w| w.0).collect())
    }
}
