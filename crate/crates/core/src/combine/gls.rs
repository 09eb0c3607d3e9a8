//! Global multi-task combination: the GLS solution of the stacked regression
//! `ŷ = K y + ε`, `Ω = W⁻¹K (KᵀW⁻¹K)⁻¹`, `ŷᶜ = Ωᵀŷ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::covariance::{estimate_covariance, CovConfig, CovEstimate};

use crate::error::{Error, Result};
use crate::series::{build_stacking_matrix, Hierarchy};

use super::{CombinationWeights, Method};

/// Cholesky factorization that rejects indefinite and numerically singular
/// matrices (squared pivot ratio below machine epsilon).
pub(crate) fn checked_cholesky(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| Error::SingularCovariance("matrix is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (min, max) = (diag.min(), diag.max());
    if !(min > 0.0) || (min / max).powi(2) < f64::EPSILON {
        return Err(Error::SingularCovariance(format!(
            "matrix is numerically singular (pivot ratio {:e})",
            (min / max).powi(2)
        )));
    }
    Ok(chol)
}

/// GLS combination weights for error covariance `w` and stacking matrix `k`.
///
/// The returned weights also carry `W_c = (KᵀW⁻¹K)⁻¹`, the error covariance
/// of the combined forecast.
pub fn gw_weights(w: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<CombinationWeights> {
    let (m, n) = k.shape();
    if n == 0 || m % n != 0 {
        return Err(Error::InvalidArgument(format!(
            "stacking matrix has shape {m}x{n}"
        )));
    }
    if w.shape() != (m, m) {
        return Err(Error::InvalidArgument(format!(
            "covariance is {}x{}, expected {m}x{m}",
            w.nrows(),
            w.ncols()
        )));
    }
    let winv_k = checked_cholesky(w)?.solve(k);
    let precision = k.tr_mul(&winv_k);
    let wc = checked_cholesky(&precision)?.inverse();
    let omega = winv_k * &wc;
    let mut weights = CombinationWeights::new(omega, n, m / n, Method::Gw);
    weights.combined_cov = Some(wc);
    Ok(weights)
}

/// Convenience: builds `K` for the covariance's block structure.
pub fn gw_weights_for(w: &DMatrix<f64>, n: usize, p: usize) -> Result<CombinationWeights> {
    gw_weights(w, &build_stacking_matrix(n, p)?)
}

/// Which variables enter the GLS system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GwScope {
    /// All `n` variables; the total's combined value is then overwritten.
    #[default]
    WithTotal,
    /// Only the bottom variables; the total is their sum.
    BottomsOnly,
}

impl fmt::Display for GwScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GwScope::WithTotal => "with-total",
            GwScope::BottomsOnly => "bottoms-only",
        })
    }
}

impl FromStr for GwScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "with-total" => Ok(GwScope::WithTotal),
            "bottoms-only" => Ok(GwScope::BottomsOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown gw scope {other:?}"
            ))),
        }
    }
}

/// GLS weights estimated on the bottom variables only, embedded in the full
/// `m × n` layout: the total's column is the sum of the bottom columns, so
/// the combined total equals the sum of combined bottoms. `combined_cov` is
/// `S W_c Sᵀ` with `S = [I; 1ᵀ]`. Returns the weights and the bottom-level
/// covariance estimate.
pub fn gw_bottoms_weights(
    samples: &DMatrix<f64>,
    hierarchy: &Hierarchy,
    p: usize,
    cov: &CovConfig,
) -> Result<(CombinationWeights, CovEstimate)> {
    let (n, nb) = (hierarchy.n(), hierarchy.n_bottom());
    if samples.ncols() != n * p {
        return Err(Error::InvalidArgument(format!(
            "samples have {} columns, expected {}",
            samples.ncols(),
            n * p
        )));
    }
    let cols: Vec<usize> = (0..p)
        .flat_map(|j| (0..nb).map(move |i| j * n + i))
        .collect();
    let sub = samples.select_columns(&cols);
    let estimate = estimate_covariance(&sub, nb, p, cov)?;
    let inner = gw_weights_for(&estimate.matrix, nb, p)?;
    let mut omega = DMatrix::zeros(n * p, n);
    for j in 0..p {
        for i in 0..nb {
            for c in 0..nb {
                let v = inner.omega[(j * nb + i, c)];
                omega[(j * n + i, c)] = v;
                omega[(j * n + i, nb)] += v;
            }
        }
    }
    let wc = inner.combined_cov.expect("gw weights carry W_c");
    let mut s = DMatrix::zeros(n, nb);
    for i in 0..nb {
        s[(i, i)] = 1.0;
        s[(nb, i)] = 1.0;
    }
    let mut weights = CombinationWeights::new(omega, n, p, Method::Gw);
    weights.combined_cov = Some(&s * wc * s.transpose());
    Ok((weights, estimate))
}

/// Result of [`gw_combine`] for one stacked forecast vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GwOutput {
    /// Coherent combined forecast, canonical series order.
    pub values: Vec<f64>,
    /// The total's own combined value before it was replaced by the bottom sum.
    pub total_before_overwrite: f64,
}

/// `ŷᶜ = Ωᵀŷ` over all `n` variables, then the total is overwritten with the
/// sum of the combined bottom series.
pub fn gw_combine(
    weights: &CombinationWeights,
    stacked: &[f64],
    hierarchy: &Hierarchy,
) -> Result<GwOutput> {
    if weights.n != hierarchy.n() {
        return Err(Error::InvalidArgument(format!(
            "weights are for {} variables, hierarchy has {}",
            weights.n,
            hierarchy.n()
        )));
    }
    let col = DMatrix::from_column_slice(stacked.len(), 1, stacked);
    let combined = weights.apply(&col)?;
    let mut values: Vec<f64> = combined.column(0).iter().copied().collect();
    let t = hierarchy.total_index();
    let total_before_overwrite = values[t];
    values[t] = values[..t].iter().sum();
    Ok(GwOutput {
        values,
        total_before_overwrite,
    })
}

/// Bottom-up coherency step applied column-wise to an `n × S` matrix.
/// Returns the totals before overwrite.
pub(crate) fn overwrite_total(combined: &mut DMatrix<f64>, hierarchy: &Hierarchy) -> Vec<f64> {
    let t = hierarchy.total_index();
    let mut before = Vec::with_capacity(combined.ncols());
    for mut col in combined.column_iter_mut() {
        before.push(col[t]);
        col[t] = col.rows(0, t).iter().sum();
    }
    before
}
