//! Single-task combiners: equal weights and the two local weighting rules
//! (inverse variance, and the full per-variable covariance form).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{ensure_pd, sample_cov};
use crate::error::{Error, Result};

use super::{CombinationWeights, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalMode {
    Var,
    Cov,
}

/// Arithmetic mean across experts.
pub fn ew_combine(experts: &[f64]) -> Result<f64> {
    if experts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "combination needs p >= 2 experts, got {}",
            experts.len()
        )));
    }
    Ok(experts.iter().sum::<f64>() / experts.len() as f64)
}

/// Inverse-variance weights `(1/σ_j²) / Σ_l (1/σ_l²)`.
pub fn lw_var_weights(variances: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateVariance(format!(
            "error variance {v} is not strictly positive"
        )));
    }
    let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

/// Inverse-variance weights, taking the σ → 0 limit for zero variances: the
/// weight is shared equally among the zero-variance experts.
pub(crate) fn lw_var_weights_limit(variances: &[f64]) -> Result<Vec<f64>> {
    let zero = variances.iter().filter(|&&v| v == 0.0).count();
    if zero == 0 {
        return lw_var_weights(variances);
    }
    Ok(variances
        .iter()
        .map(|&v| if v == 0.0 { 1.0 / zero as f64 } else { 0.0 })
        .collect())
}

/// `Σ⁻¹1 / (1ᵀΣ⁻¹1)`; weights sum to one and may be negative.
pub fn lw_cov_weights(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = sigma.nrows();
    if p == 0 || sigma.ncols() != p {
        return Err(Error::InvalidArgument(format!(
            "expected a square covariance, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let chol = super::gls::checked_cholesky(sigma)?;
    let x = chol.solve(&DVector::from_element(p, 1.0));
    let total = x.sum();
    if !(total > 0.0) {
        return Err(Error::SingularCovariance(format!(
            "1ᵀΣ⁻¹1 = {total} is not positive"
        )));
    }
    Ok(x.iter().map(|w| w / total).collect())
}

/// Euclidean projection of `w` onto the probability simplex.
pub fn clamp_to_simplex(w: &[f64]) -> Vec<f64> {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    w.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Columns of variable `i` in an expert-major layout.
pub(crate) fn variable_columns(n: usize, p: usize, i: usize) -> Vec<usize> {
    (0..p).map(|j| j * n + i).collect()
}

fn weights_to_omega(per_var: &[Vec<f64>], n: usize, p: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(n * p, n);
    for (i, w) in per_var.iter().enumerate() {
        for (j, &wj) in w.iter().enumerate() {
            omega[(j * n + i, i)] = wj;
        }
    }
    omega
}

/// Equal-weights combination matrix: `1/p` on each variable's own rows.
pub fn ew_weights(n: usize, p: usize) -> Result<CombinationWeights> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "combination needs p >= 2 experts, got {p}"
        )));
    }
    let per_var = vec![vec![1.0 / p as f64; p]; n];
    Ok(CombinationWeights::new(
        weights_to_omega(&per_var, n, p),
        n,
        p,
        Method::Ew,
    ))
}

/// Per-variable local weights estimated from a `T × (n p)` expert-major
/// error sample matrix.
///
/// Zero-variance experts are handled by the σ → 0 limit (var mode) or by
/// flooring the per-variable covariance (cov mode); an all-zero block falls
/// back to equal weights.
pub fn local_weights(
    samples: &DMatrix<f64>,
    n: usize,
    p: usize,
    mode: LocalMode,
    center: bool,
    floor_ratio: f64,
    clamp: bool,
) -> Result<CombinationWeights> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "combination needs p >= 2 experts, got {p}"
        )));
    }
    if samples.ncols() != n * p {
        return Err(Error::InvalidArgument(format!(
            "samples have {} columns, expected {}",
            samples.ncols(),
            n * p
        )));
    }
    let mut per_var = Vec::with_capacity(n);
    for i in 0..n {
        let cols = variable_columns(n, p, i);
        let block = samples.select_columns(&cols);
        let sigma = sample_cov(&block, center)?;
        let w = match mode {
            LocalMode::Var => lw_var_weights_limit(sigma.diagonal().as_slice())?,
            LocalMode::Cov => {
                if sigma.amax() == 0.0 {
                    vec![1.0 / p as f64; p]
                } else {
                    let w = lw_cov_weights(&ensure_pd(&sigma, floor_ratio)?)?;
                    if clamp {
                        clamp_to_simplex(&w)
                    } else {
                        w
                    }
                }
            }
        };
        per_var.push(w);
    }
    let method = match mode {
        LocalMode::Var => Method::LwVar,
        LocalMode::Cov => Method::LwCov,
    };
    Ok(CombinationWeights::new(
        weights_to_omega(&per_var, n, p),
        n,
        p,
        method,
    ))
}

/// Applies local weights to stacked base forecasts (`m × S`, one column per
/// slot). No coherency adjustment.
pub fn local_combine(weights: &CombinationWeights, stacked: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    weights.apply(stacked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn ew_examples() {
        assert_eq!(ew_combine(&[100.0, 200.0]).unwrap(), 150.0);
        assert_eq!(ew_combine(&[7.5, 7.5]).unwrap(), 7.5);
        assert_eq!(ew_combine(&[0.0, 0.0, 3.0]).unwrap(), 1.0);
        assert!(ew_combine(&[1.0]).is_err());
    }

    #[test]
    fn lw_var_examples() {
        assert!(close(
            &lw_var_weights(&[1.0, 3.0]).unwrap(),
            &[0.75, 0.25],
            1e-15
        ));
        assert!(close(
            &lw_var_weights(&[2.0, 2.0, 2.0]).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15
        ));
        assert!(close(
            &lw_var_weights(&[1.0, 1.0, 2.0]).unwrap(),
            &[0.4, 0.4, 0.2],
            1e-15
        ));
        assert!(matches!(
            lw_var_weights(&[1.0, 0.0]),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(matches!(
            lw_var_weights(&[1.0, -2.0]),
            Err(Error::DegenerateVariance(_))
        ));
        assert_eq!(
            lw_var_weights_limit(&[0.0, 4.0, 0.0]).unwrap(),
            vec![0.5, 0.0, 0.5]
        );
    }

    #[test]
    fn lw_cov_examples() {
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert!(close(&lw_cov_weights(&diag).unwrap(), &[0.75, 0.25], 1e-14));
        // Σ⁻¹1 = (1/1.75)(1.5, 0.5)
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        assert!(close(&lw_cov_weights(&s).unwrap(), &[0.75, 0.25], 1e-14));
        assert!(close(
            &lw_cov_weights(&DMatrix::identity(2, 2)).unwrap(),
            &[0.5, 0.5],
            1e-15
        ));
        let singular = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            lw_cov_weights(&singular),
            Err(Error::SingularCovariance(_))
        ));
    }

    #[test]
    fn lw_cov_allows_negative_weights() {
        // strongly correlated experts with unequal variances
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.8, 1.8, 4.0]);
        let w = lw_cov_weights(&s).unwrap();
        assert!(w[1] < 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = clamp_to_simplex(&w);
        assert_eq!(c, vec![1.0, 0.0]);
    }

    #[test]
    fn simplex_projection_keeps_feasible_points() {
        let w = [0.2, 0.3, 0.5];
        assert!(close(&clamp_to_simplex(&w), &w, 1e-15));
        let c = clamp_to_simplex(&[2.0, 0.0]);
        assert!(close(&c, &[1.0, 0.0], 1e-15));
    }

    #[test]
    fn local_combine_applies_weights() {
        // n=2, p=2; variances (1, 3) on both variables
        let mut samples = DMatrix::zeros(4, 4);
        for (r, s) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            samples[(r, 0)] = *s;
            samples[(r, 1)] = *s;
            samples[(r, 2)] = s * 3f64.sqrt();
            samples[(r, 3)] = -s * 3f64.sqrt();
        }
        let w = local_weights(&samples, 2, 2, LocalMode::Var, false, 1e-8, false).unwrap();
        let stacked = DMatrix::from_column_slice(4, 1, &[10.0, 20.0, 30.0, 40.0]);
        let out = local_combine(&w, &stacked).unwrap();
        assert!((out[(0, 0)] - (0.75 * 10.0 + 0.25 * 30.0)).abs() < 1e-12);
        assert!((out[(1, 0)] - (0.75 * 20.0 + 0.25 * 40.0)).abs() < 1e-12);
    }
}
