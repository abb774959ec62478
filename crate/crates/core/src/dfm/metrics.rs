use nalgebra::DMatrix;

use super::blocks::{BlockStructure, FactorBlock};
use crate::linalg::pinv;

/// Share of the variation of `truth` spanned by `estimate`:
/// `tr(F'F̂ (F̂'F̂)^{-1} F̂'F) / tr(F'F)`.
pub fn trace_r2(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> f64 {
    let cross = truth.transpose() * estimate;
    let gram = estimate.transpose() * estimate;
    let num = (&cross * pinv(&gram) * cross.transpose()).trace();
    let den = (truth.transpose() * truth).trace();
    num / den
}

/// Trace R² computed separately for every factor block.
pub fn block_trace_r2(blocks: &BlockStructure, truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Vec<(FactorBlock, f64)> {
    blocks
        .factor_blocks()
        .into_iter()
        .map(|b| {
            let f = truth.columns(b.offset, b.size).into_owned();
            let g = estimate.columns(b.offset, b.size).into_owned();
            (b.block, trace_r2(&f, &g))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_to_rotation_of_estimate() {
        let f = DMatrix::from_fn(30, 2, |i, j| ((i + 3 * j) as f64 * 0.41).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        assert!((trace_r2(&f, &(&f * rot * 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_estimate_scores_zero() {
        let f = DMatrix::from_fn(4, 1, |i, _| [1.0, -1.0, 1.0, -1.0][i]);
        let g = DMatrix::from_fn(4, 1, |i, _| [1.0, 1.0, -1.0, -1.0][i]);
        assert!(trace_r2(&f, &g).abs() < 1e-15);
    }
}
