//! Daily random walk: tomorrow's 15-minute load equals today's observation
//! at the same slot.

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::series::{ForecastSet, Panel, SLOTS_PER_DAY};

/// Expert label used for the daily random walk.
pub const DRW_EXPERT: &str = "drw";

#[derive(Debug, Clone, PartialEq)]
pub struct DrwForecast {
    /// The observed day the values are copied from.
    pub origin_day: NaiveDate,
    /// `series × 96`, row-major.
    pub values: Vec<f64>,
}

impl DrwForecast {
    pub fn target_day(&self) -> NaiveDate {
        self.origin_day + Days::new(1)
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i * SLOTS_PER_DAY..(i + 1) * SLOTS_PER_DAY]
    }
}

/// Forecast for `target_day`, copied from the panel's `target_day - 1`.
pub fn drw_forecast(panel: &Panel, target_day: NaiveDate) -> Result<DrwForecast> {
    let origin_day = target_day
        .checked_sub_days(Days::new(1))
        .ok_or_else(|| Error::InvalidArgument("target day underflows calendar".into()))?;
    let d = panel
        .day_index(origin_day)
        .ok_or(Error::InsufficientHistory {
            first_missing: origin_day,
        })?;
    let mut values = Vec::with_capacity(panel.n_series() * SLOTS_PER_DAY);
    for i in 0..panel.n_series() {
        values.extend_from_slice(panel.day(i, d));
    }
    Ok(DrwForecast { origin_day, values })
}

/// The drw expert over the whole panel range as a `series × day × slot`
/// buffer; the first day has no source and is NaN.
pub fn drw_expert_values(panel: &Panel) -> Vec<f64> {
    let mut values = Vec::with_capacity(panel.values().len());
    for i in 0..panel.n_series() {
        values.extend(std::iter::repeat_n(f64::NAN, SLOTS_PER_DAY));
        for d in 1..panel.n_days() {
            values.extend_from_slice(panel.day(i, d - 1));
        }
    }
    values
}

/// Appends the drw expert (labelled [`DRW_EXPERT`]) to an aligned forecast set.
pub fn with_drw_expert(forecasts: &ForecastSet, panel: &Panel) -> Result<ForecastSet> {
    forecasts.check_aligned(panel)?;
    if forecasts.expert_index(DRW_EXPERT).is_some() {
        return Err(Error::InvalidArgument(format!(
            "forecast set already has an expert named {DRW_EXPERT:?}"
        )));
    }
    forecasts.with_expert(DRW_EXPERT, &drw_expert_values(panel))
}
