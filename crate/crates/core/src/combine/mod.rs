//! The seven forecasting procedures compared by the harness.
//!
//! Every procedure is linear in the stacked base forecasts, so each one is
//! represented by an `m × n` matrix `Ω` with `ỹ = Ωᵀŷ`: a selector for the
//! naive pass-through, `1/p` blocks for equal weights, per-variable weights
//! for the local rules, local weights times the projection for the scr
//! variants, and the GLS weights (followed by the bottom-up total) for gw.

pub mod gls;
pub mod local;
pub mod reconcile;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::{estimate_covariance, CovConfig};
use crate::error::{Error, Result};
use crate::series::{
    build_stacking_matrix, coherency_gap, flatten_errors, validation_window_at_least, ForecastSet,
    Hierarchy, Panel, SLOTS_PER_DAY,
};

pub use gls::{gw_bottoms_weights, gw_combine, gw_weights, gw_weights_for, GwOutput, GwScope};
pub use local::{
    clamp_to_simplex, ew_combine, ew_weights, local_combine, local_weights, lw_cov_weights,
    lw_var_weights, LocalMode,
};
pub use reconcile::{
    projection_matrix, reconcile_projection, reconciliation_covariance, scr_combine, scr_weights,
    ScrSettings,
};

/// Forecasting procedure, in the order `k = 1..7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Drw,
    Ew,
    LwVar,
    LwCov,
    ScrVar,
    ScrCov,
    Gw,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Drw,
        Method::Ew,
        Method::LwVar,
        Method::LwCov,
        Method::ScrVar,
        Method::ScrCov,
        Method::Gw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Drw => "drw",
            Method::Ew => "ew",
            Method::LwVar => "lw_var",
            Method::LwCov => "lw_cov",
            Method::ScrVar => "scr_var",
            Method::ScrCov => "scr_cov",
            Method::Gw => "gw",
        }
    }

    /// Whether the procedure's output satisfies the hierarchy by construction.
    pub fn is_coherent(self) -> bool {
        matches!(self, Method::ScrVar | Method::ScrCov | Method::Gw)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// The `m × n` matrix mapping stacked base forecasts to combined forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    pub omega: DMatrix<f64>,
    pub n: usize,
    pub p: usize,
    pub method: Method,
    pub origin_day: Option<NaiveDate>,
    /// `W_c = (KᵀW⁻¹K)⁻¹` for GLS-derived weights.
    pub combined_cov: Option<DMatrix<f64>>,
}

impl CombinationWeights {
    pub fn new(omega: DMatrix<f64>, n: usize, p: usize, method: Method) -> Self {
        Self {
            omega,
            n,
            p,
            method,
            origin_day: None,
            combined_cov: None,
        }
    }

    /// `Ωᵀ X` for stacked forecasts `X` (`m × S`).
    pub fn apply(&self, stacked: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if stacked.nrows() != self.omega.nrows() {
            return Err(Error::InvalidArgument(format!(
                "stacked forecasts have {} rows, weights expect {}",
                stacked.nrows(),
                self.omega.nrows()
            )));
        }
        Ok(self.omega.tr_mul(stacked))
    }

    /// `max |ΩᵀK - I_n|`.
    pub fn unbiasedness_defect(&self) -> f64 {
        let k = build_stacking_matrix(self.n, self.p).expect("weights have n, p >= 1");
        (self.omega.tr_mul(&k) - DMatrix::identity(self.n, self.n)).amax()
    }

    /// Per-variable weight vectors `ω_i` (length `p`), read from the
    /// variable's own rows.
    pub fn per_variable(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                (0..self.p)
                    .map(|j| self.omega[(j * self.n + i, i)])
                    .collect()
            })
            .collect()
    }
}

/// One procedure's forecast for one target day.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedForecast {
    pub method: Method,
    pub origin_day: NaiveDate,
    /// `series × 96`, canonical series order.
    pub values: Vec<f64>,
    pub coherent: bool,
    /// gw only: the total's own combined values before the bottom-up overwrite.
    pub total_before_overwrite: Option<Vec<f64>>,
}

impl CombinedForecast {
    fn from_matrix(method: Method, origin_day: NaiveDate, m: &DMatrix<f64>) -> Self {
        let mut values = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            values.extend(m.row(r).iter());
        }
        Self {
            method,
            origin_day,
            values,
            coherent: method.is_coherent(),
            total_before_overwrite: None,
        }
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i * SLOTS_PER_DAY..(i + 1) * SLOTS_PER_DAY]
    }

    /// The `n`-vector at 0-based `slot`.
    pub fn at_slot(&self, slot: usize) -> Vec<f64> {
        let n = self.values.len() / SLOTS_PER_DAY;
        (0..n)
            .map(|i| self.values[i * SLOTS_PER_DAY + slot])
            .collect()
    }

    /// Largest coherency gap over the 96 slots.
    pub fn max_coherency_gap(&self, hierarchy: &Hierarchy) -> Result<f64> {
        (0..SLOTS_PER_DAY)
            .map(|h| coherency_gap(&self.at_slot(h), hierarchy))
            .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)))
    }
}

/// Settings for one origin's combination run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub window_days: usize,
    /// Smallest acceptable window when history is short; equal to
    /// `window_days` for strict behaviour.
    pub min_window_days: usize,
    pub cov: CovConfig,
    pub drw_expert: String,
    pub clamp_lw_cov: bool,
    #[serde(default)]
    pub gw_scope: GwScope,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            window_days: 28,
            min_window_days: 7,
            cov: CovConfig::default(),
            drw_expert: crate::naive::DRW_EXPERT.to_string(),
            clamp_lw_cov: false,
            gw_scope: GwScope::WithTotal,
        }
    }
}

/// Everything produced for a single forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct DayCombination {
    pub origin_day: NaiveDate,
    pub window_days: usize,
    pub lambda: f64,
    pub cov_repaired: bool,
    /// In [`Method::ALL`] order.
    pub forecasts: Vec<CombinedForecast>,
    /// In [`Method::ALL`] order.
    pub weights: Vec<CombinationWeights>,
}

impl DayCombination {
    pub fn forecast(&self, method: Method) -> &CombinedForecast {
        &self.forecasts[Method::ALL.iter().position(|&m| m == method).unwrap()]
    }

    pub fn weights(&self, method: Method) -> &CombinationWeights {
        &self.weights[Method::ALL.iter().position(|&m| m == method).unwrap()]
    }
}

/// Base forecasts of day offset `d` as an `m × 96` expert-major matrix.
pub fn stacked_day(forecasts: &ForecastSet, d: usize) -> DMatrix<f64> {
    let (n, p) = (forecasts.n_series(), forecasts.n_experts());
    let mut out = DMatrix::zeros(n * p, SLOTS_PER_DAY);
    for j in 0..p {
        for i in 0..n {
            for (h, &v) in forecasts.day(i, j, d).iter().enumerate() {
                out[(j * n + i, h)] = v;
            }
        }
    }
    out
}

/// Runs all seven procedures for target day `origin_day`, with one weight
/// set estimated from the validation window that ends the day before.
pub fn run_all_methods(
    origin_day: NaiveDate,
    panel: &Panel,
    forecasts: &ForecastSet,
    hierarchy: &Hierarchy,
    config: &MethodConfig,
) -> Result<DayCombination> {
    forecasts.check_aligned(panel)?;
    hierarchy.check_series(panel.series_ids())?;
    let (n, p) = (hierarchy.n(), forecasts.n_experts());
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "combination needs p >= 2 experts, got {p}"
        )));
    }
    let drw = forecasts.expert_index(&config.drw_expert).ok_or_else(|| {
        Error::InvalidArgument(format!("no expert named {:?}", config.drw_expert))
    })?;
    let d = forecasts
        .day_index(origin_day)
        .ok_or_else(|| Error::IncompleteInput(format!("no forecasts for {origin_day}")))?;
    if let Some(j) = (0..p).find(|&j| !forecasts.available(j, d)) {
        return Err(Error::IncompleteInput(format!(
            "expert {:?} has no forecast for {origin_day}",
            forecasts.expert_ids()[j]
        )));
    }

    let window = validation_window_at_least(
        panel,
        forecasts,
        origin_day,
        config.window_days,
        config.min_window_days,
    )?;
    let samples = flatten_errors(&window);
    let stacked = stacked_day(forecasts, d);
    let cov = &config.cov;

    let mut drw_omega = DMatrix::zeros(n * p, n);
    for i in 0..n {
        drw_omega[(drw * n + i, i)] = 1.0;
    }
    let scr = ScrSettings {
        center: cov.center,
        shrinkage: cov.shrinkage,
        floor_ratio: cov.floor_ratio,
        clamp: config.clamp_lw_cov,
    };
    let (gw, estimate) = match config.gw_scope {
        GwScope::WithTotal => {
            let estimate = estimate_covariance(&samples, n, p, cov)?;
            (
                gw_weights(&estimate.matrix, &build_stacking_matrix(n, p)?)?,
                estimate,
            )
        }
        GwScope::BottomsOnly => gw_bottoms_weights(&samples, hierarchy, p, cov)?,
    };

    let mut weights = vec![
        CombinationWeights::new(drw_omega, n, p, Method::Drw),
        ew_weights(n, p)?,
        local_weights(
            &samples,
            n,
            p,
            LocalMode::Var,
            cov.center,
            cov.floor_ratio,
            false,
        )?,
        local_weights(
            &samples,
            n,
            p,
            LocalMode::Cov,
            cov.center,
            cov.floor_ratio,
            config.clamp_lw_cov,
        )?,
        scr_weights(&samples, hierarchy, p, LocalMode::Var, &scr)?,
        scr_weights(&samples, hierarchy, p, LocalMode::Cov, &scr)?,
        gw,
    ];
    for w in &mut weights {
        w.origin_day = Some(origin_day);
    }

    let mut out = Vec::with_capacity(Method::ALL.len());
    for w in &weights {
        let mut combined = w.apply(&stacked)?;
        let before =
            (w.method == Method::Gw).then(|| gls::overwrite_total(&mut combined, hierarchy));
        let mut fc = CombinedForecast::from_matrix(w.method, origin_day, &combined);
        fc.total_before_overwrite = before;
        out.push(fc);
    }

    Ok(DayCombination {
        origin_day,
        window_days: window.n_days(),
        lambda: estimate.lambda,
        cov_repaired: estimate.repaired,
        forecasts: out,
        weights,
    })
}
