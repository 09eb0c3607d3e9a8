//! Data model for 15-minute multi-zone load panels.
//!
//! Values are kept in dense row-major buffers. Series are ordered bottoms
//! first (in ingestion order) with the total last, so the coherency relation
//! is always "last = sum of the others".
//!
//! Stacked vectors and error sample matrices use expert-major ordering: the
//! first `n` entries belong to expert 1 (all variables in series order), the
//! next `n` to expert 2, and so on.

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of 15-minute intervals in a (normalized) day.
pub const SLOTS_PER_DAY: usize = 96;

/// A `(day, slot)` position, slot in `1..=96`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeIndex {
    day: NaiveDate,
    slot: u8,
}

impl TimeIndex {
    pub fn new(day: NaiveDate, slot: usize) -> Result<Self> {
        if !(1..=SLOTS_PER_DAY).contains(&slot) {
            return Err(Error::InvalidArgument(format!(
                "slot {slot} outside 1..={SLOTS_PER_DAY}"
            )));
        }
        Ok(Self {
            day,
            slot: slot as u8,
        })
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn slot(&self) -> usize {
        self.slot as usize
    }
}

/// One-level hierarchy: a total series equal to the sum of its bottom series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hierarchy {
    total_id: String,
    bottom_ids: Vec<String>,
}

impl Hierarchy {
    pub fn new(total_id: impl Into<String>, bottom_ids: Vec<String>) -> Result<Self> {
        let total_id = total_id.into();
        if bottom_ids.is_empty() {
            return Err(Error::InvalidArgument(
                "hierarchy needs at least one bottom series".into(),
            ));
        }
        for (k, id) in bottom_ids.iter().enumerate() {
            if *id == total_id {
                return Err(Error::InvalidArgument(format!(
                    "total series {total_id:?} listed among bottoms"
                )));
            }
            if bottom_ids[..k].contains(id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate bottom series {id:?}"
                )));
            }
        }
        Ok(Self {
            total_id,
            bottom_ids,
        })
    }

    pub fn total_id(&self) -> &str {
        &self.total_id
    }

    pub fn bottom_ids(&self) -> &[String] {
        &self.bottom_ids
    }

    pub fn n_bottom(&self) -> usize {
        self.bottom_ids.len()
    }

    /// Total variable count `n = n_b + 1`.
    pub fn n(&self) -> usize {
        self.bottom_ids.len() + 1
    }

    /// Canonical series order: bottoms, then the total.
    pub fn series_ids(&self) -> Vec<String> {
        let mut ids = self.bottom_ids.clone();
        ids.push(self.total_id.clone());
        ids
    }

    pub fn total_index(&self) -> usize {
        self.bottom_ids.len()
    }

    /// Checks that `ids` is exactly the canonical series order.
    pub fn check_series(&self, ids: &[String]) -> Result<()> {
        let expected = self.series_ids();
        if ids != expected.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "series {ids:?} do not match hierarchy order {expected:?}"
            )));
        }
        Ok(())
    }
}

/// `|value(total) - sum(value(bottoms))|` for an `n`-vector in canonical order.
pub fn coherency_gap(values: &[f64], hierarchy: &Hierarchy) -> Result<f64> {
    if values.len() != hierarchy.n() {
        return Err(Error::InvalidArgument(format!(
            "expected {} values for hierarchy, got {}",
            hierarchy.n(),
            values.len()
        )));
    }
    let t = hierarchy.total_index();
    let bottoms: f64 = values[..t].iter().sum();
    Ok((values[t] - bottoms).abs())
}

/// The stacking matrix `K = 1_p ⊗ I_n` of shape `(n p) × n`.
pub fn build_stacking_matrix(n: usize, p: usize) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "stacking matrix needs n >= 1 and p >= 1, got n={n}, p={p}"
        )));
    }
    Ok(DMatrix::from_fn(n * p, n, |r, c| {
        if r % n == c {
            1.0
        } else {
            0.0
        }
    }))
}

fn day_offset(start: NaiveDate, n_days: usize, day: NaiveDate) -> Option<usize> {
    let d = (day - start).num_days();
    (d >= 0 && (d as usize) < n_days).then_some(d as usize)
}

fn nth_day(start: NaiveDate, d: usize) -> NaiveDate {
    start + Days::new(d as u64)
}

fn check_ids(kind: &str, ids: &[String]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument(format!("no {kind} ids")));
    }
    for (k, id) in ids.iter().enumerate() {
        if ids[..k].contains(id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate {kind} id {id:?}"
            )));
        }
    }
    Ok(())
}

/// Observed load, dense over `series × day × slot`, in MW.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    series_ids: Vec<String>,
    start: NaiveDate,
    n_days: usize,
    values: Vec<f64>,
}

impl Panel {
    pub fn new(
        series_ids: Vec<String>,
        start: NaiveDate,
        n_days: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_ids("series", &series_ids)?;
        if n_days == 0 {
            return Err(Error::InvalidArgument("panel has no days".into()));
        }
        let expected = series_ids.len() * n_days * SLOTS_PER_DAY;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "panel needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let per_series = n_days * SLOTS_PER_DAY;
            return Err(Error::InvalidArgument(format!(
                "non-finite panel value for series {:?} on {} slot {}",
                series_ids[k / per_series],
                nth_day(start, (k % per_series) / SLOTS_PER_DAY),
                k % SLOTS_PER_DAY + 1
            )));
        }
        Ok(Self {
            series_ids,
            start,
            n_days,
            values,
        })
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn n_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        nth_day(self.start, self.n_days - 1)
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn date(&self, d: usize) -> NaiveDate {
        nth_day(self.start, d)
    }

    pub fn day_index(&self, day: NaiveDate) -> Option<usize> {
        day_offset(self.start, self.n_days, day)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The 96 values of `series` on day offset `d`.
    pub fn day(&self, series: usize, d: usize) -> &[f64] {
        let off = (series * self.n_days + d) * SLOTS_PER_DAY;
        &self.values[off..off + SLOTS_PER_DAY]
    }

    /// Value at 1-based `slot`, or `None` if the day is outside the panel.
    pub fn value(&self, series: usize, day: NaiveDate, slot: usize) -> Option<f64> {
        let d = self.day_index(day)?;
        self.day(series, d).get(slot.checked_sub(1)?).copied()
    }

    /// Returns the panel with series permuted into hierarchy order.
    pub fn reorder(&self, hierarchy: &Hierarchy) -> Result<Panel> {
        let order = permutation(&self.series_ids, &hierarchy.series_ids())?;
        let per = self.n_days * SLOTS_PER_DAY;
        let mut values = Vec::with_capacity(self.values.len());
        for &i in &order {
            values.extend_from_slice(&self.values[i * per..(i + 1) * per]);
        }
        Panel::new(hierarchy.series_ids(), self.start, self.n_days, values)
    }

    /// Applies `f(series, day_offset, slot0, value)` to every cell.
    pub fn map(&self, f: impl Fn(usize, usize, usize, f64) -> f64) -> Result<Panel> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (i, rest) = (
                    k / (self.n_days * SLOTS_PER_DAY),
                    k % (self.n_days * SLOTS_PER_DAY),
                );
                f(i, rest / SLOTS_PER_DAY, rest % SLOTS_PER_DAY, v)
            })
            .collect();
        Panel::new(self.series_ids.clone(), self.start, self.n_days, values)
    }
}

fn permutation(have: &[String], want: &[String]) -> Result<Vec<usize>> {
    want.iter()
        .map(|id| {
            have.iter()
                .position(|h| h == id)
                .ok_or_else(|| Error::InvalidArgument(format!("series {id:?} not present in data")))
        })
        .collect()
}

/// Base forecasts, dense over `series × expert × day × slot`, in MW.
///
/// An `(expert, day)` block is either fully finite or fully NaN; NaN marks a
/// day the expert has no forecast for (e.g. the first day for the naive
/// expert, which has no preceding observation).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    series_ids: Vec<String>,
    expert_ids: Vec<String>,
    start: NaiveDate,
    n_days: usize,
    values: Vec<f64>,
}

impl ForecastSet {
    pub fn new(
        series_ids: Vec<String>,
        expert_ids: Vec<String>,
        start: NaiveDate,
        n_days: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_ids("series", &series_ids)?;
        check_ids("expert", &expert_ids)?;
        if n_days == 0 {
            return Err(Error::InvalidArgument("forecast set has no days".into()));
        }
        let expected = series_ids.len() * expert_ids.len() * n_days * SLOTS_PER_DAY;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "forecast set needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidArgument("infinite forecast value".into()));
        }
        let fs = Self {
            series_ids,
            expert_ids,
            start,
            n_days,
            values,
        };
        for j in 0..fs.n_experts() {
            for d in 0..n_days {
                let first = fs.day(0, j, d)[0].is_nan();
                let mixed =
                    (0..fs.n_series()).any(|i| fs.day(i, j, d).iter().any(|v| v.is_nan() != first));
                if mixed {
                    return Err(Error::InvalidArgument(format!(
                        "expert {:?} has a partially missing forecast on {}",
                        fs.expert_ids[j],
                        fs.date(d)
                    )));
                }
            }
        }
        Ok(fs)
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn expert_ids(&self) -> &[String] {
        &self.expert_ids
    }

    pub fn n_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn n_experts(&self) -> usize {
        self.expert_ids.len()
    }

    pub fn expert_index(&self, id: &str) -> Option<usize> {
        self.expert_ids.iter().position(|e| e == id)
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn date(&self, d: usize) -> NaiveDate {
        nth_day(self.start, d)
    }

    pub fn day_index(&self, day: NaiveDate) -> Option<usize> {
        day_offset(self.start, self.n_days, day)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, series: usize, expert: usize, d: usize) -> usize {
        ((series * self.expert_ids.len() + expert) * self.n_days + d) * SLOTS_PER_DAY
    }

    pub fn day(&self, series: usize, expert: usize, d: usize) -> &[f64] {
        let off = self.offset(series, expert, d);
        &self.values[off..off + SLOTS_PER_DAY]
    }

    /// Whether `expert` has a forecast for day offset `d`.
    pub fn available(&self, expert: usize, d: usize) -> bool {
        !self.day(0, expert, d)[0].is_nan()
    }

    /// Checks series order and date alignment against the companion panel.
    pub fn check_aligned(&self, panel: &Panel) -> Result<()> {
        if self.series_ids != panel.series_ids {
            return Err(Error::InvalidArgument(format!(
                "forecast series {:?} differ from panel series {:?}",
                self.series_ids, panel.series_ids
            )));
        }
        if self.start != panel.start || self.n_days != panel.n_days {
            return Err(Error::InvalidArgument(format!(
                "forecast range {}+{}d differs from panel range {}+{}d",
                self.start, self.n_days, panel.start, panel.n_days
            )));
        }
        Ok(())
    }

    pub fn reorder(&self, hierarchy: &Hierarchy) -> Result<ForecastSet> {
        let order = permutation(&self.series_ids, &hierarchy.series_ids())?;
        let per = self.expert_ids.len() * self.n_days * SLOTS_PER_DAY;
        let mut values = Vec::with_capacity(self.values.len());
        for &i in &order {
            values.extend_from_slice(&self.values[i * per..(i + 1) * per]);
        }
        ForecastSet::new(
            hierarchy.series_ids(),
            self.expert_ids.clone(),
            self.start,
            self.n_days,
            values,
        )
    }

    /// Keeps only the listed experts, in the listed order.
    pub fn select_experts(&self, ids: &[String]) -> Result<ForecastSet> {
        let idx: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.expert_index(id)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown expert {id:?}")))
            })
            .collect::<Result<_>>()?;
        let mut values =
            Vec::with_capacity(self.n_series() * idx.len() * self.n_days * SLOTS_PER_DAY);
        for i in 0..self.n_series() {
            for &j in &idx {
                for d in 0..self.n_days {
                    values.extend_from_slice(self.day(i, j, d));
                }
            }
        }
        ForecastSet::new(
            self.series_ids.clone(),
            ids.to_vec(),
            self.start,
            self.n_days,
            values,
        )
    }

    /// Appends one expert given as a `series × day × slot` buffer.
    pub fn with_expert(&self, id: impl Into<String>, values: &[f64]) -> Result<ForecastSet> {
        let per_series = self.n_days * SLOTS_PER_DAY;
        if values.len() != self.n_series() * per_series {
            return Err(Error::InvalidArgument(format!(
                "new expert needs {} values, got {}",
                self.n_series() * per_series,
                values.len()
            )));
        }
        let mut expert_ids = self.expert_ids.clone();
        expert_ids.push(id.into());
        let per_block = self.n_experts() * per_series;
        let mut out = Vec::with_capacity(self.values.len() + values.len());
        for i in 0..self.n_series() {
            out.extend_from_slice(&self.values[i * per_block..(i + 1) * per_block]);
            out.extend_from_slice(&values[i * per_series..(i + 1) * per_series]);
        }
        ForecastSet::new(
            self.series_ids.clone(),
            expert_ids,
            self.start,
            self.n_days,
            out,
        )
    }

    /// Applies `f(series, expert, day_offset, slot0, value)` to every cell.
    pub fn map(&self, f: impl Fn(usize, usize, usize, usize, f64) -> f64) -> Result<ForecastSet> {
        let p = self.n_experts();
        let per_day = SLOTS_PER_DAY;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let h = k % per_day;
                let d = (k / per_day) % self.n_days;
                let j = (k / (per_day * self.n_days)) % p;
                let i = k / (per_day * self.n_days * p);
                f(i, j, d, h, v)
            })
            .collect();
        ForecastSet::new(
            self.series_ids.clone(),
            self.expert_ids.clone(),
            self.start,
            self.n_days,
            values,
        )
    }
}

/// Forecast errors `forecast - actual` over a window of consecutive days,
/// dense over `series × expert × day × slot`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPanel {
    n_series: usize,
    n_experts: usize,
    start: NaiveDate,
    n_days: usize,
    values: Vec<f64>,
}

impl ErrorPanel {
    pub fn n_series(&self) -> usize {
        self.n_series
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    /// Samples per `(series, expert)`: `n_days × 96`.
    pub fn n_samples(&self) -> usize {
        self.n_days * SLOTS_PER_DAY
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Error of `(series, expert)` at window day offset `d`, 0-based slot.
    pub fn get(&self, series: usize, expert: usize, d: usize, slot0: usize) -> f64 {
        self.values[((series * self.n_experts + expert) * self.n_days + d) * SLOTS_PER_DAY + slot0]
    }
}

/// Number of consecutive days before `origin_day` on which the panel and
/// every expert are available, capped at `max_days`.
pub fn available_history(
    panel: &Panel,
    forecasts: &ForecastSet,
    origin_day: NaiveDate,
    max_days: usize,
) -> usize {
    let mut k = 0;
    while k < max_days {
        let Some(day) = origin_day.checked_sub_days(Days::new(k as u64 + 1)) else {
            break;
        };
        let complete = match (panel.day_index(day), forecasts.day_index(day)) {
            (Some(_), Some(fd)) => (0..forecasts.n_experts()).all(|j| forecasts.available(j, fd)),
            _ => false,
        };
        if !complete {
            break;
        }
        k += 1;
    }
    k
}

/// Errors for exactly the `window_days` days preceding `origin_day`.
pub fn validation_window(
    panel: &Panel,
    forecasts: &ForecastSet,
    origin_day: NaiveDate,
    window_days: usize,
) -> Result<ErrorPanel> {
    if window_days == 0 {
        return Err(Error::InvalidArgument("window_days must be >= 1".into()));
    }
    forecasts.check_aligned(panel)?;
    let first = origin_day
        .checked_sub_days(Days::new(window_days as u64))
        .ok_or_else(|| Error::InvalidArgument("origin day underflows calendar".into()))?;
    let mut day_idx = Vec::with_capacity(window_days);
    for k in 0..window_days {
        let day = nth_day(first, k);
        let complete = panel
            .day_index(day)
            .filter(|&d| (0..forecasts.n_experts()).all(|j| forecasts.available(j, d)));
        match complete {
            Some(d) => day_idx.push(d),
            None => return Err(Error::InsufficientHistory { first_missing: day }),
        }
    }
    let (n, p) = (panel.n_series(), forecasts.n_experts());
    let mut values = Vec::with_capacity(n * p * window_days * SLOTS_PER_DAY);
    for i in 0..n {
        for j in 0..p {
            for &d in &day_idx {
                let f = forecasts.day(i, j, d);
                let y = panel.day(i, d);
                values.extend(f.iter().zip(y).map(|(f, y)| f - y));
            }
        }
    }
    Ok(ErrorPanel {
        n_series: n,
        n_experts: p,
        start: first,
        n_days: window_days,
        values,
    })
}

/// Like [`validation_window`], but shrinks the window to the available
/// consecutive history when that is at least `min_days`.
pub fn validation_window_at_least(
    panel: &Panel,
    forecasts: &ForecastSet,
    origin_day: NaiveDate,
    window_days: usize,
    min_days: usize,
) -> Result<ErrorPanel> {
    let avail = available_history(panel, forecasts, origin_day, window_days);
    if avail >= window_days {
        return validation_window(panel, forecasts, origin_day, window_days);
    }
    if avail >= min_days.max(1) {
        log::warn!(
            "origin {origin_day}: validation window shrunk from {window_days} to {avail} days"
        );
        return validation_window(panel, forecasts, origin_day, avail);
    }
    Err(Error::InsufficientHistory {
        first_missing: origin_day - Days::new(avail as u64 + 1),
    })
}

/// Flattens a window into a `T × (n p)` sample matrix: rows chronological by
/// `(day, slot)`, columns expert-major (column `j n + i` is variable `i` of
/// expert `j`).
pub fn flatten_errors(errors: &ErrorPanel) -> DMatrix<f64> {
    let (n, p, t) = (errors.n_series, errors.n_experts, errors.n_samples());
    let mut out = DMatrix::zeros(t, n * p);
    for i in 0..n {
        for j in 0..p {
            let off = (i * p + j) * t;
            let src = &errors.values[off..off + t];
            out.column_mut(j * n + i).copy_from_slice(src);
        }
    }
    out
}
