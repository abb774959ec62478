//! Deterministic quasi-uniform point sets on spheres and ellipsoids.
//!
//! The unit sphere in `d` dimensions is covered by nested polar rings: the
//! first angle takes equally spaced midpoints, and each ring is filled by the
//! same construction one dimension down with arc step scaled by the ring
//! radius. The common step is tuned so that the number of points matches a
//! budget that grows with the granularity `δ`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;

use super::contour::Contour;

/// Points at granularity 8.
pub const BASE_POINTS: f64 = 3000.0;
/// Points at granularity 10.
pub const FINE_POINTS: f64 = 5500.0;

/// Target point count `3000 (δ/8)^κ`, with `κ` chosen so that `δ = 10`
/// gives 5500.
pub fn point_budget(delta: u32) -> usize {
    let kappa = (FINE_POINTS / BASE_POINTS).ln() / (10.0f64 / 8.0).ln();
    (BASE_POINTS * (delta as f64 / 8.0).powf(kappa)).round().max(1.0) as usize
}

fn count(n: usize, h: f64) -> usize {
    match n {
        0 => 0,
        1 => 2,
        2 => (2.0 * PI / h).round().max(1.0) as usize,
        _ => {
            let levels = (PI / h).round().max(1.0) as usize;
            (0..levels)
                .map(|i| {
                    let theta = (i as f64 + 0.5) * PI / levels as f64;
                    count(n - 1, h / theta.sin())
                })
                .sum()
        }
    }
}

fn generate(n: usize, h: f64, out: &mut Vec<Vec<f64>>) {
    match n {
        0 => {}
        1 => {
            out.push(vec![1.0]);
            out.push(vec![-1.0]);
        }
        2 => {
            let k = (2.0 * PI / h).round().max(1.0) as usize;
            for j in 0..k {
                let phi = 2.0 * PI * j as f64 / k as f64;
                out.push(vec![phi.cos(), phi.sin()]);
            }
        }
        _ => {
            let levels = (PI / h).round().max(1.0) as usize;
            for i in 0..levels {
                let theta = (i as f64 + 0.5) * PI / levels as f64;
                let (c, s) = (theta.cos(), theta.sin());
                let mut ring = Vec::new();
                generate(n - 1, h / s, &mut ring);
                for u in ring {
                    let mut p = Vec::with_capacity(n);
                    p.push(c);
                    p.extend(u.iter().map(|v| s * v));
                    out.push(p);
                }
            }
        }
    }
}

/// Arc step whose point count is closest to `target`.
fn calibrate(n: usize, target: usize) -> f64 {
    if n == 2 {
        return 2.0 * PI / target as f64;
    }
    let (mut lo, mut hi) = (1e-4f64, PI);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if count(n, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (cl, ch) = (count(n, lo), count(n, hi));
    if cl.abs_diff(target) <= ch.abs_diff(target) {
        lo
    } else {
        hi
    }
}

/// Unit-sphere mesh in `d` dimensions at granularity `delta`, shared across calls.
pub fn unit_sphere_mesh(d: usize, delta: u32) -> Arc<Vec<DVector<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<Vec<DVector<f64>>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(m) = cache.lock().expect("mesh cache").get(&(d, delta)) {
        return m.clone();
    }
    let mut raw = Vec::new();
    if d > 0 {
        let h = if d == 1 { PI } else { calibrate(d, point_budget(delta)) };
        generate(d, h, &mut raw);
    }
    let mesh: Arc<Vec<DVector<f64>>> = Arc::new(raw.into_iter().map(DVector::from_vec).collect());
    cache.lock().expect("mesh cache").insert((d, delta), mesh.clone());
    mesh
}

/// Mesh mapped onto the contour surface, `center + radius · L u`.
pub fn mesh_points(contour: &Contour, delta: u32) -> Vec<DVector<f64>> {
    unit_sphere_mesh(contour.dim(), delta).iter().map(|u| contour.point(u)).collect()
}
