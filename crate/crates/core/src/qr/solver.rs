//! Linear-programming solution of the check-loss regression.
//!
//! An interior-point method on the bounded dual gives a near-optimal
//! coefficient vector; a simplex-type descent over elemental bases then moves
//! to an exact vertex optimum.

use nalgebra::{DMatrix, DVector};

use crate::linalg::symmetrize;

/// Check loss `ρ_τ(u) = u (τ - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        (tau - 1.0) * u
    } else {
        tau * u
    }
}

pub fn objective(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    (y - x * beta).iter().map(|&u| check_loss(u, tau)).sum()
}

const IPM_MAX_ITER: usize = 100;
const IPM_STEP: f64 = 0.99995;
const IPM_TOL: f64 = 1e-10;

/// Primal-dual predictor-corrector method for
/// `max y'a  s.t.  X'a = (1-τ) X'1,  0 ≤ a ≤ 1`.
///
/// Returns the coefficient vector recovered from the equality multipliers.
pub fn interior_point(y: &DVector<f64>, x: &DMatrix<f64>, tau: f64) -> Option<DVector<f64>> {
    let (n, p) = x.shape();
    let a = x.transpose(); // p x n
    let c = -y;
    let b = &a * DVector::from_element(n, 1.0 - tau);
    let mut xv = DVector::from_element(n, 1.0 - tau);
    let mut s = DVector::from_element(n, tau);

    let gram = &a * x;
    let chol = gram.clone().cholesky()?;
    let mut dual = chol.solve(&(&a * &c));
    let r = &c - x * &dual;
    let mut z = r.map(|v| v.max(0.0));
    let mut w = &z - &r;
    // keep the starting point strictly interior
    let shift = 1e-3 * (1.0 + r.amax());
    z.add_scalar_mut(shift);
    w.add_scalar_mut(shift);

    for _ in 0..IPM_MAX_ITER {
        let gap = xv.dot(&z) + s.dot(&w);
        let ob = c.dot(&xv).abs();
        if gap < IPM_TOL * (1.0 + ob) {
            break;
        }
        let rp = &b - &a * &xv;
        let rd = &c - x * &dual - &z + &w;
        let q = DVector::from_fn(n, |i, _| 1.0 / (z[i] / xv[i] + w[i] / s[i]));
        let aq = DMatrix::from_fn(p, n, |i, j| a[(i, j)] * q[j]);
        let mut m = &aq * x;
        symmetrize(&mut m);
        let mchol = m.cholesky()?;

        let solve_dir = |r_xz: &DVector<f64>, r_sw: &DVector<f64>| {
            // dx = q ∘ (A'dy - rd + r_xz / x - r_sw / s)
            let v = DVector::from_fn(n, |i, _| -rd[i] + r_xz[i] / xv[i] - r_sw[i] / s[i]);
            let rhs = &rp - &aq * &v;
            let dy = mchol.solve(&rhs);
            let ady = x * &dy;
            let dx = DVector::from_fn(n, |i, _| q[i] * (ady[i] + v[i]));
            let ds = -&dx;
            let dz = DVector::from_fn(n, |i, _| (r_xz[i] - z[i] * dx[i]) / xv[i]);
            let dw = DVector::from_fn(n, |i, _| (r_sw[i] - w[i] * ds[i]) / s[i]);
            (dx, ds, dy, dz, dw)
        };
        let step = |v: &DVector<f64>, dv: &DVector<f64>| {
            v.iter().zip(dv.iter()).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(1.0, f64::min)
        };

        let r_xz = -xv.component_mul(&z);
        let r_sw = -s.component_mul(&w);
        let (dx, ds, _, dz, dw) = solve_dir(&r_xz, &r_sw);
        let ap = step(&xv, &dx).min(step(&s, &ds));
        let ad = step(&z, &dz).min(step(&w, &dw));
        let mu = gap / (2 * n) as f64;
        let gap_aff = (&xv + &dx * ap).dot(&(&z + &dz * ad)) + (&s + &ds * ap).dot(&(&w + &dw * ad));
        let sigma = (gap_aff / gap).powi(3);

        let r_xz = DVector::from_fn(n, |i, _| -xv[i] * z[i] - dx[i] * dz[i] + sigma * mu);
        let r_sw = DVector::from_fn(n, |i, _| -s[i] * w[i] - ds[i] * dw[i] + sigma * mu);
        let (dx, ds, dy, dz, dw) = solve_dir(&r_xz, &r_sw);
        let ap = (IPM_STEP * step(&xv, &dx).min(step(&s, &ds))).min(1.0);
        let ad = (IPM_STEP * step(&z, &dz).min(step(&w, &dw))).min(1.0);
        xv += &dx * ap;
        s += &ds * ap;
        dual += &dy * ad;
        z += &dz * ad;
        w += &dw * ad;
        if xv.iter().chain(s.iter()).chain(dual.iter()).any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(-dual)
}

/// Choose `p` observations with the smallest absolute residuals whose design
/// rows are linearly independent.
fn initial_basis(x: &DMatrix<f64>, resid: &DVector<f64>) -> Option<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| resid[i].abs().total_cmp(&resid[j].abs()).then(i.cmp(&j)));
    let scale = x.amax().max(1.0);
    let mut basis: Vec<usize> = Vec::with_capacity(p);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let mut v = x.row(i).transpose();
        for q in &ortho {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let nv = v.norm();
        if nv > 1e-9 * scale {
            ortho.push(v / nv);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

/// Descend from the elemental basis closest to `start` to a vertex at which
/// no edge direction decreases the objective. Ties are broken towards the
/// lowest basis position and the lowest observation index.
pub fn vertex_polish(y: &DVector<f64>, x: &DMatrix<f64>, tau: f64, start: &DVector<f64>) -> Option<(DVector<f64>, Vec<usize>)> {
    let (n, p) = x.shape();
    let mut basis = initial_basis(x, &(y - x * start))?;
    let tol = 1e-12 * (1.0 + y.amax()) * (1.0 + x.amax());
    let max_pivots = 50 * n.max(10);

    for _ in 0..max_pivots {
        let xh = DMatrix::from_fn(p, p, |i, j| x[(basis[i], j)]);
        let yh = DVector::from_fn(p, |i, _| y[basis[i]]);
        let lu = xh.lu();
        let beta = lu.solve(&yh)?;
        let inv = lu.try_inverse()?;
        let resid = y - x * &beta;
        let in_basis = {
            let mut v = vec![false; n];
            basis.iter().for_each(|&i| v[i] = true);
            v
        };

        // Directional derivative along δ = sign · X_h^{-1} e_k.
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..p {
            let col = inv.column(k);
            let a = x * col; // a_i = x_i' X_h^{-1} e_k
            for sign in [1.0, -1.0] {
                // released basic point: residual moves to -sign·t
                let mut g = if sign > 0.0 { 1.0 - tau } else { tau };
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let ai = sign * a[i];
                    let ri = resid[i];
                    // residual r_i - t a_i
                    g += if ri > tol || (ri.abs() <= tol && ai < 0.0) { -tau * ai } else { (1.0 - tau) * ai };
                }
                if g < -1e-12 && best.is_none_or(|(bg, _, _)| g < bg - 1e-15) {
                    best = Some((g, k, sign));
                }
            }
        }
        let Some((g0, k, sign)) = best else {
            return Some((beta, basis));
        };

        // Line search: slope increases by |a_i| at each breakpoint t_i = r_i / a_i.
        let a = x * inv.column(k) * sign;
        let mut breaks: Vec<(f64, usize, f64)> = (0..n)
            .filter(|&i| !in_basis[i] && a[i].abs() > 1e-14)
            .filter_map(|i| {
                let t = resid[i] / a[i];
                (t >= -tol).then_some((t.max(0.0), i, a[i].abs()))
            })
            .collect();
        breaks.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)));
        let mut slope = g0;
        let mut entering = None;
        for &(_, i, w) in &breaks {
            slope += w;
            if slope >= -1e-14 {
                entering = Some(i);
                break;
            }
        }
        let i = entering?;
        basis[k] = i;
    }
    None
}
