use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::blocks::{BlockStructure, FactorBlock, FactorBlockInfo};
use super::DfmError;
use crate::data::{BlockKey, Sector};
use crate::linalg::{matrix_rows, submatrix};
use crate::state_space::{stationary_covariance, StateSpaceModel};

/// Lower bound applied to every idiosyncratic variance.
pub const IDIO_VAR_FLOOR: f64 = 1e-4;

/// Parameters of the two-level factor model in stacked form.
///
/// `lambda` carries the structural zero pattern: row `i` is non-zero only in
/// the global slots of its sector and the local slots of its block.
/// `transition` and `sigma_u` are block diagonal over factor blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLDFMParams {
    pub blocks: BlockStructure,
    #[serde(with = "matrix_rows")]
    pub lambda: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub transition: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub sigma_u: DMatrix<f64>,
    pub idio_var: Vec<f64>,
}

impl MLDFMParams {
    pub fn n_factors(&self) -> usize {
        self.transition.nrows()
    }

    /// Λ^(s): rows are the sector's series in panel order.
    pub fn global_loadings(&self, s: Sector) -> DMatrix<f64> {
        self.block_loadings(FactorBlock::Global(s))
    }

    /// Ψ^(c,s): rows are the block's series in panel order.
    pub fn local_loadings(&self, key: BlockKey) -> DMatrix<f64> {
        self.block_loadings(FactorBlock::Local(key))
    }

    pub fn block_loadings(&self, block: FactorBlock) -> DMatrix<f64> {
        match self.blocks.factor_block(block) {
            Some(info) => submatrix(&self.lambda, &info.series, &info.slots().collect::<Vec<_>>()),
            None => DMatrix::zeros(0, 0),
        }
    }

    pub fn block_transition(&self, info: &FactorBlockInfo) -> DMatrix<f64> {
        self.transition.view((info.offset, info.offset), (info.size, info.size)).into_owned()
    }

    pub fn block_sigma_u(&self, info: &FactorBlockInfo) -> DMatrix<f64> {
        self.sigma_u.view((info.offset, info.offset), (info.size, info.size)).into_owned()
    }

    /// State-space form with a zero initial mean and stationary initial covariance.
    pub fn state_space(&self) -> Result<StateSpaceModel, DfmError> {
        let p0 = stationary_covariance(&self.transition, &self.sigma_u);
        let k = self.n_factors();
        Ok(StateSpaceModel::new(
            self.lambda.clone(),
            self.transition.clone(),
            self.sigma_u.clone(),
            DVector::from_vec(self.idio_var.clone()),
            DVector::zeros(k),
            p0,
        )?)
    }

    /// True when every loading outside a series' permitted slots is exactly zero
    /// and the transition and innovation matrices are block diagonal.
    pub fn has_structural_zeros(&self) -> bool {
        let r = self.n_factors();
        for i in 0..self.lambda.nrows() {
            let allowed = self.blocks.permitted_slots(i);
            if (0..r).any(|j| !allowed.contains(&j) && self.lambda[(i, j)] != 0.0) {
                return false;
            }
        }
        let blocks = self.blocks.factor_blocks();
        let owner = |j: usize| blocks.iter().position(|b| b.slots().contains(&j));
        for i in 0..r {
            for j in 0..r {
                if owner(i) != owner(j) && (self.transition[(i, j)] != 0.0 || self.sigma_u[(i, j)] != 0.0) {
                    return false;
                }
            }
        }
        true
    }

    pub fn validate(&self) -> Result<(), DfmError> {
        let n = self.blocks.n_series();
        let r = self.blocks.total_factors();
        if self.lambda.shape() != (n, r)
            || self.transition.shape() != (r, r)
            || self.sigma_u.shape() != (r, r)
            || self.idio_var.len() != n
        {
            return Err(DfmError::Config("parameter dimensions do not match the block structure".into()));
        }
        if !self.has_structural_zeros() {
            return Err(DfmError::Config("parameters violate the block zero pattern".into()));
        }
        Ok(())
    }

    /// Flip the sign of factor `j` (its loadings and the matching rows and
    /// columns of the transition and innovation matrices).
    pub(crate) fn flip_factor(&mut self, j: usize) {
        self.lambda.column_mut(j).neg_mut();
        self.transition.row_mut(j).neg_mut();
        self.transition.column_mut(j).neg_mut();
        self.sigma_u.row_mut(j).neg_mut();
        self.sigma_u.column_mut(j).neg_mut();
    }
}
