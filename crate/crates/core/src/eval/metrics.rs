//! MAE / MSE per `(series, slot)` cell, their ratios against a benchmark, and
//! geometric averaging.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SLOTS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Absolute,
    Squared,
}

impl Loss {
    pub fn eval(self, error: f64) -> f64 {
        match self {
            Loss::Absolute => error.abs(),
            Loss::Squared => error * error,
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" | "abs" | "mae" => Ok(Loss::Absolute),
            "squared" | "sq" | "mse" => Ok(Loss::Squared),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }
}

/// Mean loss of `forecast - actual` over evaluation days.
pub fn mean_loss(actual: &[f64], forecast: &[f64], loss: Loss) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if actual.len() != forecast.len() {
        return Err(Error::InvalidArgument(format!(
            "{} actuals vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(y, f)| loss.eval(f - y))
        .sum();
    Ok(total / actual.len() as f64)
}

pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    mean_loss(actual, forecast, Loss::Absolute)
}

pub fn mse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    mean_loss(actual, forecast, Loss::Squared)
}

/// `mae_method / mae_benchmark`.
pub fn rmae(mae_method: f64, mae_benchmark: f64) -> Result<f64> {
    if !(mae_benchmark > 0.0) {
        return Err(Error::DegenerateBenchmark {
            series: String::new(),
            slot: 0,
        });
    }
    Ok(mae_method / mae_benchmark)
}

/// Geometric mean `exp(mean(log r))`.
pub fn ga_rmae(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("geometric mean of no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "geometric mean needs positive values, got {v}"
        )));
    }
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    Ok(mean_log.exp())
}

/// Forecasts and actuals over the evaluation days, each buffer laid out
/// `series × day × slot`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecords {
    pub series_ids: Vec<String>,
    pub days: Vec<NaiveDate>,
    pub actuals: Vec<f64>,
    pub methods: Vec<String>,
    pub forecasts: Vec<Vec<f64>>,
}

impl EvalRecords {
    pub fn n_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn method_index(&self, id: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == id)
    }

    pub fn series_index(&self, id: &str) -> Option<usize> {
        self.series_ids.iter().position(|m| m == id)
    }

    fn check(&self) -> Result<()> {
        let cells = self.n_series() * self.n_days() * SLOTS_PER_DAY;
        if self.n_days() == 0 {
            return Err(Error::EmptyEvaluation);
        }
        if self.actuals.len() != cells || self.forecasts.iter().any(|f| f.len() != cells) {
            return Err(Error::InvalidArgument(
                "evaluation buffers have inconsistent sizes".into(),
            ));
        }
        if self.forecasts.len() != self.methods.len() {
            return Err(Error::InvalidArgument(
                "one forecast buffer per method required".into(),
            ));
        }
        Ok(())
    }

    /// Per-day values of `buf` at `(series, slot0)`.
    pub fn column(&self, buf: &[f64], series: usize, slot0: usize) -> Vec<f64> {
        (0..self.n_days())
            .map(|d| buf[(series * self.n_days() + d) * SLOTS_PER_DAY + slot0])
            .collect()
    }

    /// Per-day errors (forecast − actual) of `method` at `(series, slot0)`.
    pub fn errors(&self, method: usize, series: usize, slot0: usize) -> Vec<f64> {
        let f = self.column(&self.forecasts[method], series, slot0);
        let y = self.column(&self.actuals, series, slot0);
        f.iter().zip(&y).map(|(f, y)| f - y).collect()
    }
}

/// Accuracy scores over `(series, horizon, method)` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub series_ids: Vec<String>,
    pub methods: Vec<String>,
    pub benchmark: String,
    pub n_days: usize,
    /// `series × horizon × method`, MW.
    pub mae: Vec<f64>,
    /// `series × horizon × method`, MW².
    pub mse: Vec<f64>,
    /// `mae / mae(benchmark)`.
    pub rmae: Vec<f64>,
    /// `mse / mse(benchmark)`.
    pub rmse: Vec<f64>,
}

impl ScoreTable {
    pub fn compute(records: &EvalRecords, benchmark: &str) -> Result<ScoreTable> {
        records.check()?;
        let b = records.method_index(benchmark).ok_or_else(|| {
            Error::IncompleteInput(format!("benchmark {benchmark:?} not among methods"))
        })?;
        let (ns, nm) = (records.n_series(), records.methods.len());
        let cells = ns * SLOTS_PER_DAY * nm;
        let (mut mae_v, mut mse_v) = (Vec::with_capacity(cells), Vec::with_capacity(cells));
        let (mut rmae_v, mut rmse_v) = (Vec::with_capacity(cells), Vec::with_capacity(cells));
        for i in 0..ns {
            for h in 0..SLOTS_PER_DAY {
                let y = records.column(&records.actuals, i, h);
                let row: Vec<(f64, f64)> = (0..nm)
                    .map(|k| {
                        let f = records.column(&records.forecasts[k], i, h);
                        Ok((mae(&y, &f)?, mse(&y, &f)?))
                    })
                    .collect::<Result<_>>()?;
                let (bm, bs) = row[b];
                if !(bm > 0.0) || !(bs > 0.0) {
                    return Err(Error::DegenerateBenchmark {
                        series: records.series_ids[i].clone(),
                        slot: h + 1,
                    });
                }
                for (k, &(m, s)) in row.iter().enumerate() {
                    mae_v.push(m);
                    mse_v.push(s);
                    rmae_v.push(if k == b { 1.0 } else { m / bm });
                    rmse_v.push(if k == b { 1.0 } else { s / bs });
                }
            }
        }
        Ok(ScoreTable {
            series_ids: records.series_ids.clone(),
            methods: records.methods.clone(),
            benchmark: benchmark.to_string(),
            n_days: records.n_days(),
            mae: mae_v,
            mse: mse_v,
            rmae: rmae_v,
            rmse: rmse_v,
        })
    }

    pub fn index(&self, series: usize, slot0: usize, method: usize) -> usize {
        (series * SLOTS_PER_DAY + slot0) * self.methods.len() + method
    }

    pub fn method_index(&self, id: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == id)
    }

    /// Relative scores (MAE or MSE ratio) of `method` for the given series,
    /// over all 96 horizons each.
    pub fn relative(&self, loss: Loss, method: usize, series: &[usize]) -> Vec<f64> {
        let src = match loss {
            Loss::Absolute => &self.rmae,
            Loss::Squared => &self.rmse,
        };
        series
            .iter()
            .flat_map(|&i| (0..SLOTS_PER_DAY).map(move |h| (i, h)))
            .map(|(i, h)| src[self.index(i, h, method)])
            .collect()
    }
}
