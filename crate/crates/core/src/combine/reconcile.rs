//! Sequential combine-then-reconcile: local combination followed by an
//! oblique projection onto the coherent subspace `{y : a·y = 0}` with
//! `a = (-1, …, -1, 1)` over (bottoms, total).

use nalgebra::{DMatrix, DVector};

use crate::covariance::{ensure_pd, estimate_lambda, sample_cov, shrink_to_diagonal, Shrinkage};
use crate::error::{Error, Result};
use crate::series::Hierarchy;

use super::local::{local_weights, LocalMode};
use super::{CombinationWeights, Method};

fn constraint_row(hierarchy: &Hierarchy) -> DVector<f64> {
    let n = hierarchy.n();
    let mut a = DVector::from_element(n, -1.0);
    a[hierarchy.total_index()] = 1.0;
    a
}

/// The `n × n` projection `I - W_r aᵀ (a W_r aᵀ)⁻¹ a`.
pub fn projection_matrix(hierarchy: &Hierarchy, w_r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = hierarchy.n();
    if w_r.shape() != (n, n) {
        return Err(Error::InvalidArgument(format!(
            "reconciliation covariance is {}x{}, expected {n}x{n}",
            w_r.nrows(),
            w_r.ncols()
        )));
    }
    let a = constraint_row(hierarchy);
    let wa = w_r * &a;
    let denom = a.dot(&wa);
    if !(denom > 0.0) {
        return Err(Error::InvalidCovariance(format!(
            "a W_r aᵀ = {denom} is not positive"
        )));
    }
    Ok(DMatrix::identity(n, n) - (wa * a.transpose()) / denom)
}

/// `ỹ = y* - W_r aᵀ (a W_r aᵀ)⁻¹ a y*`.
pub fn reconcile_projection(
    incoherent: &[f64],
    hierarchy: &Hierarchy,
    w_r: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if incoherent.len() != hierarchy.n() {
        return Err(Error::InvalidArgument(format!(
            "expected {} values, got {}",
            hierarchy.n(),
            incoherent.len()
        )));
    }
    let proj = projection_matrix(hierarchy, w_r)?;
    let y = proj * DVector::from_column_slice(incoherent);
    Ok(y.iter().copied().collect())
}

/// Reconciliation covariance from the locally combined validation errors
/// (`T × n`): the diagonal of the variances for `Var`, a shrunk full
/// covariance for `Cov`. An all-zero estimate falls back to the identity.
pub fn reconciliation_covariance(
    combined_errors: &DMatrix<f64>,
    mode: LocalMode,
    center: bool,
    shrinkage: Shrinkage,
    floor_ratio: f64,
) -> Result<DMatrix<f64>> {
    let n = combined_errors.ncols();
    let s = sample_cov(combined_errors, center)?;
    if s.amax() == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    match mode {
        LocalMode::Var => {
            let diag = s
                .diagonal()
                .map(|v| v.max(floor_ratio * s.diagonal().max()));
            Ok(DMatrix::from_diagonal(&diag))
        }
        LocalMode::Cov => {
            let lambda = match shrinkage {
                Shrinkage::Auto => estimate_lambda(combined_errors, center)?,
                Shrinkage::Fixed(l) => l,
            };
            ensure_pd(&shrink_to_diagonal(&s, lambda)?, floor_ratio)
        }
    }
}

/// Settings shared by the scr variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrSettings {
    pub center: bool,
    pub shrinkage: Shrinkage,
    pub floor_ratio: f64,
    pub clamp: bool,
}

/// Combined scr weights: local weights `Ω_l` followed by the projection `P`,
/// i.e. `Ω = Ω_l Pᵀ`, so that `ỹ = P Ω_lᵀ ŷ`.
pub fn scr_weights(
    samples: &DMatrix<f64>,
    hierarchy: &Hierarchy,
    p: usize,
    mode: LocalMode,
    settings: &ScrSettings,
) -> Result<CombinationWeights> {
    let n = hierarchy.n();
    let local = local_weights(
        samples,
        n,
        p,
        mode,
        settings.center,
        settings.floor_ratio,
        settings.clamp,
    )?;
    let combined_errors = samples * &local.omega;
    let w_r = reconciliation_covariance(
        &combined_errors,
        mode,
        settings.center,
        settings.shrinkage,
        settings.floor_ratio,
    )?;
    let proj = projection_matrix(hierarchy, &w_r)?;
    let method = match mode {
        LocalMode::Var => Method::ScrVar,
        LocalMode::Cov => Method::ScrCov,
    };
    Ok(CombinationWeights::new(
        local.omega * proj.transpose(),
        n,
        p,
        method,
    ))
}

/// Local combination then reconciliation of stacked base forecasts
/// (`m × S`), returning a coherent `n × S` matrix.
pub fn scr_combine(
    stacked: &DMatrix<f64>,
    samples: &DMatrix<f64>,
    hierarchy: &Hierarchy,
    p: usize,
    mode: LocalMode,
    settings: &ScrSettings,
) -> Result<DMatrix<f64>> {
    scr_weights(samples, hierarchy, p, mode, settings)?.apply(stacked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::coherency_gap;

    fn h2() -> Hierarchy {
        Hierarchy::new("T", vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn coherent_input_is_fixed_point() {
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let y = reconcile_projection(&[4.0, 6.0, 10.0], &h2(), &w).unwrap();
        assert!(y
            .iter()
            .zip([4.0, 6.0, 10.0])
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn identity_projection_hand_solution() {
        // bottoms (4,5), total 10 -> a·y = 1, a W aᵀ = 3; total 29/3, bottoms 13/3, 16/3
        let y = reconcile_projection(&[4.0, 5.0, 10.0], &h2(), &DMatrix::identity(3, 3)).unwrap();
        assert!((y[2] - 29.0 / 3.0).abs() < 1e-12);
        assert!((y[0] - 13.0 / 3.0).abs() < 1e-12);
        assert!((y[1] - 16.0 / 3.0).abs() < 1e-12);
        assert!(coherency_gap(&y, &h2()).unwrap() < 1e-12);
    }

    #[test]
    fn projection_is_scale_invariant() {
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let a = reconcile_projection(&[4.0, 5.0, 10.0], &h2(), &w).unwrap();
        let b = reconcile_projection(&[4.0, 5.0, 10.0], &h2(), &(w * 17.5)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn non_positive_constraint_variance_rejected() {
        assert!(matches!(
            reconcile_projection(&[1.0, 1.0, 1.0], &h2(), &DMatrix::zeros(3, 3)),
            Err(Error::InvalidCovariance(_))
        ));
    }
}
