//! Matching a skew-t law to a handful of quantiles.
//!
//! For fixed `(λ, ν)` the quantiles are `μ + σ z_p(λ, ν)`, so location and
//! scale follow from a least-squares line through the standardized
//! quantiles. Skewness is searched over `λ = sinh(s)` on a grid, refined by
//! golden-section search around the best grid points, with `ν` enumerated
//! over integers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use super::{std_quantile, SkewTError, SkewTParams};

pub const NU_MIN: u32 = 2;
pub const NU_MAX: u32 = 30;
/// Quantile levels matched by default.
pub const BASE_PROBS: [f64; 4] = [0.25, 0.50, 0.75, 0.95];
/// Optional additional levels.
pub const EXTRA_PROBS: [f64; 3] = [0.05, 0.10, 0.90];

const S_MAX: f64 = 5.0;
const S_STEPS: usize = 100;
const STARTS: usize = 5;
const GOLDEN_ITERS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewTFit {
    pub params: SkewTParams,
    /// Sum of squared differences between fitted and target quantiles.
    pub residual: f64,
    /// The best skewness sits on the edge of the search range.
    pub stagnated: bool,
}

struct QuantileTable {
    /// `z[(ν - NU_MIN) * (S_STEPS + 1) + k]` holds the standardized quantiles at `s_k`.
    z: Vec<Option<Vec<f64>>>,
}

fn s_at(k: usize) -> f64 {
    -S_MAX + 2.0 * S_MAX * k as f64 / S_STEPS as f64
}

fn std_quantiles(probs: &[f64], s: f64, nu: u32) -> Option<Vec<f64>> {
    probs.iter().map(|&p| std_quantile(p, s.sinh(), nu as f64).ok()).collect()
}

fn table(probs: &[f64]) -> Arc<QuantileTable> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<u64>, Arc<QuantileTable>>>> = OnceLock::new();
    let key: Vec<u64> = probs.iter().map(|p| p.to_bits()).collect();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache").get(&key) {
        return t.clone();
    }
    let n_nu = (NU_MAX - NU_MIN + 1) as usize;
    let z = (0..n_nu * (S_STEPS + 1))
        .into_par_iter()
        .map(|i| std_quantiles(probs, s_at(i % (S_STEPS + 1)), NU_MIN + (i / (S_STEPS + 1)) as u32))
        .collect();
    let t = Arc::new(QuantileTable { z });
    cache.lock().expect("table cache").insert(key, t.clone());
    t
}

/// Location, scale and residual of the best line `t ≈ μ + σ z` with `σ > 0`.
fn profile(z: &[f64], tc: &[f64]) -> Option<(f64, f64, f64)> {
    let n = z.len() as f64;
    let zbar = z.iter().sum::<f64>() / n;
    let (mut szz, mut szt) = (0.0, 0.0);
    for (zi, ti) in z.iter().zip(tc) {
        szz += (zi - zbar) * (zi - zbar);
        szt += (zi - zbar) * ti;
    }
    let sigma = szt / szz;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return None;
    }
    let res = z.iter().zip(tc).map(|(zi, ti)| (ti - sigma * (zi - zbar)).powi(2)).sum();
    Some((-sigma * zbar, sigma, res))
}

/// Skew-t law whose quantiles at the given levels are closest, in squared
/// error, to the targets. `targets` holds `(probability, value)` pairs with
/// both coordinates strictly increasing.
pub fn fit_to_quantiles(targets: &[(f64, f64)]) -> Result<SkewTFit, SkewTError> {
    if targets.len() < 3 {
        return Err(SkewTError::Targets(format!("need at least three quantiles, got {}", targets.len())));
    }
    for w in targets.windows(2) {
        if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
            return Err(SkewTError::Targets(format!(
                "targets must increase strictly: ({}, {}) then ({}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    if targets.iter().any(|&(p, v)| !(p > 0.0 && p < 1.0) || !v.is_finite()) {
        return Err(SkewTError::Targets("probabilities must lie in (0, 1) and values be finite".into()));
    }
    let probs: Vec<f64> = targets.iter().map(|t| t.0).collect();
    let tbar = targets.iter().map(|t| t.1).sum::<f64>() / targets.len() as f64;
    let tc: Vec<f64> = targets.iter().map(|t| t.1 - tbar).collect();

    let tab = table(&probs);
    let width = S_STEPS + 1;
    let res_at = |i: usize| tab.z[i].as_ref().and_then(|z| profile(z, &tc)).map_or(f64::INFINITY, |r| r.2);
    let grid: Vec<f64> = (0..tab.z.len()).map(res_at).collect();

    // local minima along the skewness axis, best first
    let mut starts: Vec<(f64, usize)> = (0..grid.len())
        .filter(|&i| {
            let k = i % width;
            let left = if k > 0 { grid[i - 1] } else { f64::INFINITY };
            let right = if k + 1 < width { grid[i + 1] } else { f64::INFINITY };
            grid[i].is_finite() && grid[i] <= left && grid[i] <= right
        })
        .map(|i| (grid[i], i))
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    starts.truncate(STARTS);
    if starts.is_empty() {
        return Err(SkewTError::Targets("no skew-t law has increasing quantiles matching the targets".into()));
    }

    let mut best: Option<(f64, f64, u32, usize)> = None; // residual, s, ν, grid index
    for &(r0, i) in &starts {
        let nu = NU_MIN + (i / width) as u32;
        let k = i % width;
        let eval = |s: f64| std_quantiles(&probs, s, nu).and_then(|z| profile(&z, &tc)).map_or(f64::INFINITY, |r| r.2);
        let (mut a, mut b) = (s_at(k.saturating_sub(1)), s_at((k + 1).min(S_STEPS)));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..GOLDEN_ITERS {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d);
            }
        }
        let (mut s, mut r) = if fc <= fd { (c, fc) } else { (d, fd) };
        if r0 <= r {
            s = s_at(k);
            r = r0;
        }
        if best.is_none_or(|(br, ..)| r < br) {
            best = Some((r, s, nu, k));
        }
    }
    let (residual, s, nu, k) = best.expect("at least one start");
    let z = std_quantiles(&probs, s, nu).expect("evaluated during search");
    let (mu_c, sigma, _) = profile(&z, &tc).expect("evaluated during search");
    let params = SkewTParams { mu: tbar + mu_c, sigma2: sigma * sigma, lambda: s.sinh(), nu: nu as f64 };
    Ok(SkewTFit { params, residual, stagnated: k == 0 || k == S_STEPS })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: [(f64, f64, f64, f64); 4] =
        [(0.32, 0.50, 0.02, 2.0), (1.05, 0.63, -1.88, 3.0), (0.51, 0.39, -0.55, 4.0), (0.14, 0.43, -0.01, 2.0)];

    fn targets_of(p: &SkewTParams, probs: &[f64]) -> Vec<(f64, f64)> {
        probs.iter().map(|&q| (q, p.quantile(q).unwrap())).collect()
    }

    #[test]
    fn reproduces_quantiles_of_reference_laws() {
        for (mu, s2, l, nu) in TABLE1 {
            let p = SkewTParams::new(mu, s2, l, nu).unwrap();
            let t = targets_of(&p, &BASE_PROBS);
            let fit = fit_to_quantiles(&t).unwrap();
            for &(q, v) in &t {
                let got = fit.params.quantile(q).unwrap();
                assert!((got - v).abs() < 1e-3, "{p:?} at {q}: {got} vs {v}");
            }
            assert!(!fit.stagnated);
        }
    }

    #[test]
    fn italy_round_trip_with_extra_levels() {
        let p = SkewTParams::new(0.14, 0.43, -0.01, 2.0).unwrap();
        let mut probs: Vec<f64> = BASE_PROBS.iter().chain(EXTRA_PROBS.iter()).copied().collect();
        probs.sort_by(f64::total_cmp);
        let t = targets_of(&p, &probs);
        let fit = fit_to_quantiles(&t).unwrap();
        for &(q, v) in &t {
            assert!((fit.params.quantile(q).unwrap() - v).abs() < 1e-3);
        }
    }

    #[test]
    fn symmetric_targets_give_small_skewness() {
        let p = SkewTParams::new(0.0, 1.0, 0.0, 6.0).unwrap();
        let fit = fit_to_quantiles(&targets_of(&p, &BASE_PROBS)).unwrap();
        assert!(fit.params.lambda.abs() < 0.05, "{:?}", fit.params);
    }

    #[test]
    fn translation_moves_only_location() {
        let p = SkewTParams::new(0.51, 0.39, -0.55, 4.0).unwrap();
        let t = targets_of(&p, &BASE_PROBS);
        let shifted: Vec<(f64, f64)> = t.iter().map(|&(q, v)| (q, v + 1.0)).collect();
        let (a, b) = (fit_to_quantiles(&t).unwrap(), fit_to_quantiles(&shifted).unwrap());
        assert!((b.params.mu - a.params.mu - 1.0).abs() < 1e-3);
        assert!((b.params.sigma2 - a.params.sigma2).abs() < 1e-3);
        assert!((b.params.lambda - a.params.lambda).abs() < 1e-3);
        assert_eq!(a.params.nu, b.params.nu);
    }

    #[test]
    fn rejects_non_increasing_targets() {
        let t = [(0.25, 0.0), (0.5, 0.0), (0.75, 1.0), (0.95, 2.0)];
        assert!(matches!(fit_to_quantiles(&t), Err(SkewTError::Targets(_))));
        assert!(fit_to_quantiles(&t[..2]).is_err());
    }
}
