//! Diebold–Mariano tests on per-day error series at a fixed horizon.
//!
//! The long-run variance of the loss differential uses a Bartlett kernel with
//! lag window `floor(Q^(1/3))`; the statistic gets the Harvey–Leybourne–
//! Newbold small-sample factor and is referred to a Student t with `Q - 1`
//! degrees of freedom.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::metrics::Loss;

/// Minimum series length accepted by [`dm_test`].
pub const MIN_DM_OBS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub one_sided: bool,
    pub n_obs: usize,
    pub lag_window: usize,
    /// Loss differential has zero variance but nonzero mean.
    pub degenerate: bool,
}

/// Bartlett lag window `floor(Q^(1/3))`.
pub fn lag_window(q: usize) -> usize {
    let l = (q as f64).cbrt().floor() as usize;
    // guard against cbrt rounding just below an exact cube
    if (l + 1).pow(3) <= q {
        l + 1
    } else {
        l
    }
}

/// Bartlett-weighted long-run variance of `d` (population autocovariances).
pub fn hac_variance(d: &[f64], lags: usize) -> f64 {
    let q = d.len() as f64;
    let mean = d.iter().sum::<f64>() / q;
    let dev: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let gamma = |k: usize| -> f64 {
        dev[k..]
            .iter()
            .zip(&dev[..dev.len() - k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / q
    };
    let mut var = gamma(0);
    for k in 1..=lags.min(d.len() - 1) {
        var += 2.0 * (1.0 - k as f64 / (lags as f64 + 1.0)) * gamma(k);
    }
    var
}

/// Tests equal accuracy of two forecasts from their error series.
///
/// The loss differential is `L(e_a) - L(e_b)`; negative statistics favour
/// `a`. The one-sided p-value is for "a more accurate than b".
pub fn dm_test(
    errors_a: &[f64],
    errors_b: &[f64],
    loss: Loss,
    one_sided: bool,
) -> Result<DmResult> {
    if errors_a.len() != errors_b.len() {
        return Err(Error::InvalidArgument(format!(
            "error series lengths differ: {} vs {}",
            errors_a.len(),
            errors_b.len()
        )));
    }
    let q = errors_a.len();
    if q < MIN_DM_OBS {
        return Err(Error::InsufficientSamples {
            needed: MIN_DM_OBS,
            got: q,
        });
    }
    let d: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| loss.eval(*a) - loss.eval(*b))
        .collect();
    dm_from_differential(&d, one_sided)
}

/// DM test on a precomputed loss differential.
pub fn dm_from_differential(d: &[f64], one_sided: bool) -> Result<DmResult> {
    let q = d.len();
    if q < MIN_DM_OBS {
        return Err(Error::InsufficientSamples {
            needed: MIN_DM_OBS,
            got: q,
        });
    }
    let lags = lag_window(q);
    let qf = q as f64;
    let mean = d.iter().sum::<f64>() / qf;
    let var = hac_variance(d, lags);
    let base = DmResult {
        statistic: 0.0,
        p_value: 1.0,
        one_sided,
        n_obs: q,
        lag_window: lags,
        degenerate: false,
    };
    if !(var > 0.0) {
        if mean == 0.0 {
            return Ok(base);
        }
        let favours_a = mean < 0.0;
        return Ok(DmResult {
            statistic: if favours_a {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            p_value: if favours_a || !one_sided { 0.0 } else { 1.0 },
            degenerate: true,
            ..base
        });
    }
    // horizon is one step (one day) for every slot
    let h = 1.0;
    let hln = ((qf + 1.0 - 2.0 * h + h * (h - 1.0) / qf) / qf).sqrt();
    let statistic = mean / (var / qf).sqrt() * hln;
    let t = StudentsT::new(0.0, 1.0, qf - 1.0).expect("dof is positive");
    let p_value = if one_sided {
        t.cdf(statistic)
    } else {
        2.0 * t.cdf(-statistic.abs())
    };
    Ok(DmResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        ..base
    })
}

/// Percentage matrix: `cells[a][b]` is the share of horizons (rounded
/// percent) where the one-sided test finds `a` more accurate than `b` at
/// level `alpha`. The diagonal is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmSummary {
    pub methods: Vec<String>,
    pub alpha: f64,
    pub cells: Vec<Vec<Option<u32>>>,
}

impl DmSummary {
    pub fn cell(&self, a: &str, b: &str) -> Option<u32> {
        let ia = self.methods.iter().position(|m| m == a)?;
        let ib = self.methods.iter().position(|m| m == b)?;
        self.cells[ia][ib]
    }
}

/// `results(a, b)` must return the per-horizon results for ordered pair
/// `(a, b)`, or `None` when that pair is missing.
pub fn dm_summary<'r>(
    methods: &[String],
    alpha: f64,
    results: impl Fn(usize, usize) -> Option<&'r [DmResult]>,
) -> Result<DmSummary> {
    let mut cells = vec![vec![None; methods.len()]; methods.len()];
    for a in 0..methods.len() {
        for b in 0..methods.len() {
            if a == b {
                continue;
            }
            let rs = results(a, b).filter(|r| !r.is_empty()).ok_or_else(|| {
                Error::IncompleteInput(format!(
                    "no DM results for pair ({}, {})",
                    methods[a], methods[b]
                ))
            })?;
            let hits = rs.iter().filter(|r| r.p_value < alpha).count();
            cells[a][b] = Some((100.0 * hits as f64 / rs.len() as f64).round() as u32);
        }
    }
    Ok(DmSummary {
        methods: methods.to_vec(),
        alpha,
        cells,
    })
}
