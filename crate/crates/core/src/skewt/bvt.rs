//! Bivariate Student-t lower-orthant probabilities for integer degrees of
//! freedom (Dunnett–Sobel series in the form given by Genz).

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, StudentsT};

fn student_cdf(nu: u32, x: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu as f64).expect("positive degrees of freedom").cdf(x)
}

/// `P(X ≤ h, Y ≤ k)` for a standard bivariate t with `nu` degrees of freedom
/// and correlation `r`.
pub fn bvt_lower(nu: u32, h: f64, k: f64, r: f64) -> f64 {
    const EPS: f64 = 1e-15;
    assert!(nu >= 1, "bivariate t requires at least one degree of freedom");
    if 1.0 - r <= EPS {
        return student_cdf(nu, h.min(k));
    }
    if r + 1.0 <= EPS {
        return if h > -k { student_cdf(nu, h) - student_cdf(nu, -k) } else { 0.0 };
    }
    let n = nu as f64;
    let tpi = 2.0 * PI;
    let ors = 1.0 - r * r;
    let hrk = h - r * k;
    let krh = k - r * h;
    let (xnhk, xnkh) = if hrk.abs() + ors > 0.0 {
        (hrk * hrk / (hrk * hrk + ors * (n + k * k)), krh * krh / (krh * krh + ors * (n + h * h)))
    } else {
        (0.0, 0.0)
    };
    let hs = if hrk < 0.0 { -1.0 } else { 1.0 };
    let ks = if krh < 0.0 { -1.0 } else { 1.0 };
    let mut bvt;
    if nu.is_multiple_of(2) {
        bvt = ors.sqrt().atan2(-r) / tpi;
        let mut gmph = h / (16.0 * (n + h * h)).sqrt();
        let mut gmpk = k / (16.0 * (n + k * k)).sqrt();
        let mut btnckh = 2.0 * xnkh.sqrt().atan2((1.0 - xnkh).sqrt()) / PI;
        let mut btpdkh = 2.0 * (xnkh * (1.0 - xnkh)).sqrt() / PI;
        let mut btnchk = 2.0 * xnhk.sqrt().atan2((1.0 - xnhk).sqrt()) / PI;
        let mut btpdhk = 2.0 * (xnhk * (1.0 - xnhk)).sqrt() / PI;
        for j in 1..=nu / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * j * btpdkh * (1.0 - xnkh) / (2.0 * j + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * j * btpdhk * (1.0 - xnhk) / (2.0 * j + 1.0);
            gmph = gmph * (2.0 * j - 1.0) / (2.0 * j * (1.0 + h * h / n));
            gmpk = gmpk * (2.0 * j - 1.0) / (2.0 * j * (1.0 + k * k / n));
        }
    } else {
        let snu = n.sqrt();
        let qhrk = (h * h + k * k - 2.0 * r * h * k + n * ors).sqrt();
        let hkrn = h * k + r * n;
        let hkn = h * k - n;
        let hpk = h + k;
        bvt = (-snu * (hkn * qhrk + hpk * hkrn)).atan2(hkn * hkrn - n * hpk * qhrk) / tpi;
        if bvt < -EPS {
            bvt += 1.0;
        }
        let mut gmph = h / (tpi * snu * (1.0 + h * h / n));
        let mut gmpk = k / (tpi * snu * (1.0 + k * k / n));
        let mut btnckh = xnkh.sqrt();
        let mut btpdkh = btnckh;
        let mut btnchk = xnhk.sqrt();
        let mut btpdhk = btnchk;
        for j in 1..=(nu - 1) / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * j - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * j);
            btnckh += btpdkh;
            btpdhk = (2.0 * j - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * j);
            btnchk += btpdhk;
            gmph = gmph * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + h * h / n));
            gmpk = gmpk * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + k * k / n));
        }
    }
    bvt
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_at_origin() {
        // P(X ≤ 0, Y ≤ 0) = 1/4 + asin(r) / (2π) for any elliptical law
        for nu in 1..8 {
            for r in [-0.9, -0.3, 0.0, 0.5, 0.95] {
                let want = 0.25 + f64::asin(r) / (2.0 * PI);
                assert!((bvt_lower(nu, 0.0, 0.0, r) - want).abs() < 1e-13, "nu {nu} r {r}");
            }
        }
    }

    #[test]
    fn large_second_bound_gives_marginal() {
        for nu in [2, 3, 4, 7] {
            let v = bvt_lower(nu, 0.7, 1e8, 0.4);
            assert!((v - student_cdf(nu, 0.7)).abs() < 1e-9);
        }
    }
}
