//! Labeled covariance matrices and the conditional-covariance algebra:
//! Schur complements, regression coefficients and concentration matrices.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::CovError;
use crate::graph::VertexId;

pub const SYMMETRY_TOL: f64 = 1e-9;
pub const PD_RATIO: f64 = 1e-10;
pub const MAX_CONDITION: f64 = 1e12;
pub const MIN_VARIANCE: f64 = 1e-12;

/// Symmetric positive-definite matrix with variable labels. Entry `(a, b)`
/// is `σ_ab` in product-moment units; standardized models give correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCovariance {
    labels: Vec<VertexId>,
    matrix: DMatrix<f64>,
    index: BTreeMap<VertexId, usize>,
}

/// A square matrix addressable by the same labels as the covariance it was
/// derived from (used for concentration matrices and cross-product blocks).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix {
    labels: Vec<VertexId>,
    matrix: DMatrix<f64>,
    index: BTreeMap<VertexId, usize>,
}

impl LabeledMatrix {
    pub fn new(labels: Vec<VertexId>, matrix: DMatrix<f64>) -> Result<Self, CovError> {
        let index = build_index(&labels)?;
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(CovError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                labels: labels.len(),
            });
        }
        Ok(LabeledMatrix {
            labels,
            matrix,
            index,
        })
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, a: &VertexId, b: &VertexId) -> Result<f64, CovError> {
        let i = self.position(a)?;
        let j = self.position(b)?;
        Ok(self.matrix[(i, j)])
    }

    pub fn position(&self, a: &VertexId) -> Result<usize, CovError> {
        self.index
            .get(a)
            .copied()
            .ok_or_else(|| CovError::UnknownLabel(a.to_string()))
    }

    /// Block with the given row and column labels, in the given order.
    pub fn block(&self, rows: &[VertexId], cols: &[VertexId]) -> Result<DMatrix<f64>, CovError> {
        let ri: Vec<usize> = rows
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<_, _>>()?;
        let ci: Vec<usize> = cols
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<_, _>>()?;
        Ok(DMatrix::from_fn(ri.len(), ci.len(), |i, j| {
            self.matrix[(ri[i], ci[j])]
        }))
    }
}

fn build_index(labels: &[VertexId]) -> Result<BTreeMap<VertexId, usize>, CovError> {
    let mut index = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        if index.insert(l.clone(), i).is_some() {
            return Err(CovError::DuplicateLabel(l.to_string()));
        }
    }
    Ok(index)
}

/// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverts a symmetric positive-definite matrix via Cholesky, rejecting
/// singular or ill-conditioned input. Never falls back to a pseudo-inverse.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, CovError> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let cond = condition_number(m);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(CovError::IllConditioned(cond));
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(CovError::NotPositiveDefinite)
}

impl LabeledCovariance {
    pub fn new(labels: Vec<VertexId>, matrix: DMatrix<f64>) -> Result<Self, CovError> {
        let index = build_index(&labels)?;
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(CovError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                labels: labels.len(),
            });
        }
        let mut asym = 0.0f64;
        for i in 0..matrix.nrows() {
            for j in i + 1..matrix.ncols() {
                asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(CovError::NotSymmetric(asym));
        }
        // work on the exactly-symmetric average
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(*b));
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        if !(min > PD_RATIO * max) {
            return Err(CovError::NotPositiveDefinite);
        }
        Ok(LabeledCovariance {
            labels,
            matrix: sym,
            index,
        })
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn contains(&self, a: &VertexId) -> bool {
        self.index.contains_key(a)
    }

    pub fn position(&self, a: &VertexId) -> Result<usize, CovError> {
        self.index
            .get(a)
            .copied()
            .ok_or_else(|| CovError::UnknownLabel(a.to_string()))
    }

    pub fn get(&self, a: &VertexId, b: &VertexId) -> Result<f64, CovError> {
        Ok(self.matrix[(self.position(a)?, self.position(b)?)])
    }

    pub fn block(&self, rows: &[VertexId], cols: &[VertexId]) -> Result<DMatrix<f64>, CovError> {
        let ri: Vec<usize> = rows
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<_, _>>()?;
        let ci: Vec<usize> = cols
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<_, _>>()?;
        Ok(DMatrix::from_fn(ri.len(), ci.len(), |i, j| {
            self.matrix[(ri[i], ci[j])]
        }))
    }

    /// Marginal covariance restricted to `labels`, in the given order.
    pub fn restricted(&self, labels: &[VertexId]) -> Result<LabeledCovariance, CovError> {
        let m = self.block(labels, labels)?;
        LabeledCovariance::new(labels.to_vec(), m)
    }

    /// Conditional covariance block `Σ_ab·c = Σ_ab − Σ_ac Σ_cc⁻¹ Σ_cb`.
    /// With `c` empty this is the marginal block.
    pub fn conditional_cov(
        &self,
        a: &[VertexId],
        b: &[VertexId],
        c: &[VertexId],
    ) -> Result<DMatrix<f64>, CovError> {
        for l in c {
            if a.contains(l) || b.contains(l) {
                return Err(CovError::DuplicateLabel(l.to_string()));
            }
        }
        let sab = self.block(a, b)?;
        if c.is_empty() {
            return Ok(sab);
        }
        let scc_inv = spd_inverse(&self.block(c, c)?)?;
        let sac = self.block(a, c)?;
        let scb = self.block(c, b)?;
        Ok(sab - sac * scc_inv * scb)
    }

    /// Scalar `σ_ab·c`.
    pub fn sigma(&self, a: &VertexId, b: &VertexId, c: &[VertexId]) -> Result<f64, CovError> {
        Ok(self.conditional_cov(&[a.clone()], &[b.clone()], c)?[(0, 0)])
    }

    /// Scalar regression coefficient `β_yx·z = σ_xy·z / σ_xx·z` of `x` in
    /// the regression of `y` on `{x} ∪ z`.
    pub fn regression_coef(
        &self,
        y: &VertexId,
        x: &VertexId,
        z: &[VertexId],
    ) -> Result<f64, CovError> {
        let sxx = self.sigma(x, x, z)?;
        if sxx <= MIN_VARIANCE {
            return Err(CovError::DegenerateVariance(x.to_string()));
        }
        Ok(self.sigma(x, y, z)? / sxx)
    }

    /// Regression coefficient matrix `B_ab·c = Σ_ab·c Σ_bb·c⁻¹` of the
    /// regressors `b` in the regression of `a` on `b ∪ c`.
    pub fn regression_block(
        &self,
        a: &[VertexId],
        b: &[VertexId],
        c: &[VertexId],
    ) -> Result<DMatrix<f64>, CovError> {
        let sab = self.conditional_cov(a, b, c)?;
        let sbb_inv = spd_inverse(&self.conditional_cov(b, b, c)?)?;
        Ok(sab * sbb_inv)
    }

    /// Concentration matrix over `s`: inverse of the marginal block `Σ_ss`,
    /// label-addressable.
    pub fn concentration(&self, s: &[VertexId]) -> Result<LabeledMatrix, CovError> {
        let inv = spd_inverse(&self.block(s, s)?)?;
        LabeledMatrix::new(s.to_vec(), inv)
    }

    /// Rescales to unit diagonal (covariance to correlation).
    pub fn to_correlation(&self) -> Result<LabeledCovariance, CovError> {
        let n = self.dim();
        let sd: DVector<f64> = DVector::from_fn(n, |i, _| self.matrix[(i, i)].sqrt());
        let m = DMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)] / (sd[i] * sd[j]));
        LabeledCovariance::new(self.labels.clone(), m)
    }

    /// Same covariance with labels (and the matrix) reordered.
    pub fn permuted(&self, order: &[VertexId]) -> Result<LabeledCovariance, CovError> {
        if order.len() != self.dim() {
            return Err(CovError::DimensionMismatch {
                rows: order.len(),
                cols: order.len(),
                labels: self.dim(),
            });
        }
        let m = self.block(order, order)?;
        LabeledCovariance::new(order.to_vec(), m)
    }

    pub fn max_abs_diag_deviation(&self) -> f64 {
        (0..self.dim()).fold(0.0f64, |acc, i| acc.max((self.matrix[(i, i)] - 1.0).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(s: &str) -> VertexId {
        s.parse().unwrap()
    }

    fn identity3() -> LabeledCovariance {
        LabeledCovariance::new(
            vec![v("A"), v("B"), v("C")],
            DMatrix::identity(3, 3),
        )
        .unwrap()
    }

    #[test]
    fn rejects_asymmetry_and_indefiniteness() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        assert!(matches!(
            LabeledCovariance::new(vec![v("A"), v("B")], m),
            Err(CovError::NotSymmetric(_))
        ));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            LabeledCovariance::new(vec![v("A"), v("B")], m),
            Err(CovError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn identity_conditional_blocks_are_zero() {
        let cov = identity3();
        let block = cov
            .conditional_cov(&[v("A")], &[v("B")], &[v("C")])
            .unwrap();
        assert_abs_diff_eq!(block[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            cov.regression_coef(&v("B"), &v("A"), &[]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn marginal_block_unchanged_with_empty_conditioning() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let cov = LabeledCovariance::new(vec![v("A"), v("B")], m.clone()).unwrap();
        let block = cov
            .conditional_cov(&[v("A"), v("B")], &[v("A"), v("B")], &[])
            .unwrap();
        assert_abs_diff_eq!(block, m, epsilon = 1e-15);
    }

    #[test]
    fn concentration_closed_form_2x2() {
        let rho = 0.6;
        let m = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let cov = LabeledCovariance::new(vec![v("A"), v("B")], m).unwrap();
        let k = cov.concentration(&[v("A"), v("B")]).unwrap();
        let scale = 1.0 / (1.0 - rho * rho);
        assert_abs_diff_eq!(k.get(&v("A"), &v("A")).unwrap(), scale, epsilon = 1e-12);
        assert_abs_diff_eq!(k.get(&v("A"), &v("B")).unwrap(), -rho * scale, epsilon = 1e-12);
    }

    #[test]
    fn identity_concentration_is_identity() {
        let cov = identity3();
        let k = cov.concentration(&[v("A"), v("B"), v("C")]).unwrap();
        assert_abs_diff_eq!(k.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn conditioning_label_reuse_is_rejected() {
        let cov = identity3();
        assert!(cov
            .conditional_cov(&[v("A")], &[v("B")], &[v("A")])
            .is_err());
    }
}
