//! Long-format load CSV ingestion and canonical export.
//!
//! The canonical schema is one row per `(timestamp, zone)` with columns
//! `timestamp` (ISO-8601, with offset), `zone`, `actual_mw` and either a
//! single `forecast_mw` column (expert `provider`) or one
//! `forecast_mw:<expert>` column per expert. Provider exports with other
//! headers are read through a [`ColumnMapping`].
//!
//! Days are local calendar days split into 96 quarter-hour slots. A day on
//! which the timestamps carry two different UTC offsets is a DST transition
//! day: slots seen twice (autumn) are averaged and a run of up to four
//! missing slots (spring) is linearly interpolated. Both are logged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ForecastSet, Panel, SLOTS_PER_DAY};

/// Expert label for a lone `forecast_mw` column.
pub const PROVIDER_EXPERT: &str = "provider";
const FORECAST_PREFIX: &str = "forecast_mw:";
const MAX_DST_GAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertColumn {
    pub expert: String,
    pub column: String,
}

/// Names of the source columns. `forecasts: None` auto-detects
/// `forecast_mw` and `forecast_mw:<expert>` headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub zone: String,
    pub actual: Option<String>,
    pub forecasts: Option<Vec<ExpertColumn>>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            zone: "zone".into(),
            actual: Some("actual_mw".into()),
            forecasts: None,
        }
    }
}

/// How a timestamp is mapped to a local day and slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimezonePolicy {
    /// Use the wall-clock time as written (its own offset).
    #[default]
    WallClock,
    /// Convert offset timestamps to UTC first; naive ones are taken as UTC.
    Utc,
}

impl std::str::FromStr for TimezonePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wall-clock" | "local" => Ok(TimezonePolicy::WallClock),
            "utc" => Ok(TimezonePolicy::Utc),
            other => Err(Error::InvalidArgument(format!(
                "unknown timezone policy {other:?}"
            ))),
        }
    }
}

/// Parsed data, series in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadData {
    pub panel: Option<Panel>,
    pub forecasts: Option<ForecastSet>,
}

struct Stamp {
    local: NaiveDateTime,
    /// Seconds since epoch of the instant (or of the naive value).
    instant: i64,
    offset: Option<i32>,
}

fn parse_timestamp(raw: &str, policy: TimezonePolicy) -> Option<Stamp> {
    let raw = raw.trim();
    let fixed = DateTime::parse_from_rfc3339(raw)
        .ok()
        .or_else(|| DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%:z").ok())
        .or_else(|| DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M%:z").ok());
    if let Some(dt) = fixed {
        let local = match policy {
            TimezonePolicy::WallClock => dt.naive_local(),
            TimezonePolicy::Utc => dt.naive_utc(),
        };
        return Some(Stamp {
            local,
            instant: dt.timestamp(),
            offset: Some(dt.offset().local_minus_utc()),
        });
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
    .map(|local| Stamp {
        local,
        instant: local.and_utc().timestamp(),
        offset: None,
    })
}

fn parse_value(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Schema(format!("line {line}: cannot parse {column} value {raw:?}")))?;
    if !v.is_finite() {
        return Ok(None);
    }
    Ok(Some(v))
}

/// One observed cell, keyed by instant for de-duplication.
type Cells = BTreeMap<i64, Vec<Option<f64>>>;

/// Reads a long-format load CSV into a dense panel and/or forecast set.
pub fn parse_load_csv(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
    policy: TimezonePolicy,
) -> Result<LoadData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_load_reader(file, mapping, policy)
}

pub fn parse_load_reader<R: std::io::Read>(
    reader: R,
    mapping: &ColumnMapping,
    policy: TimezonePolicy,
) -> Result<LoadData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("column {name:?} not found in header {headers:?}"))
        })
    };
    let ts_col = col(&mapping.timestamp)?;
    let zone_col = col(&mapping.zone)?;
    let actual_col = mapping.actual.as_deref().map(col).transpose()?;
    let experts: Vec<ExpertColumn> = match &mapping.forecasts {
        Some(list) => list.clone(),
        None => headers
            .iter()
            .filter_map(|h| {
                if h == "forecast_mw" {
                    Some(ExpertColumn {
                        expert: PROVIDER_EXPERT.into(),
                        column: h.into(),
                    })
                } else {
                    h.strip_prefix(FORECAST_PREFIX).map(|e| ExpertColumn {
                        expert: e.into(),
                        column: h.into(),
                    })
                }
            })
            .collect(),
    };
    let expert_cols = experts
        .iter()
        .map(|e| col(&e.column))
        .collect::<Result<Vec<_>>>()?;
    if actual_col.is_none() && expert_cols.is_empty() {
        return Err(Error::Schema(
            "mapping names neither an actual nor a forecast column".into(),
        ));
    }
    let n_q = 1 + expert_cols.len();

    let mut zones: Vec<String> = Vec::new();
    let mut zone_idx: HashMap<String, usize> = HashMap::new();
    // (zone, day, slot0) -> instant -> quantities
    let mut cells: HashMap<(usize, NaiveDate, usize), Cells> = HashMap::new();
    let mut offsets: HashMap<NaiveDate, BTreeSet<i32>> = HashMap::new();
    let mut duplicates = 0usize;

    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k as u64 + 2;
        let raw_ts = rec.get(ts_col).unwrap_or_default();
        let stamp = parse_timestamp(raw_ts, policy)
            .ok_or_else(|| Error::Schema(format!("line {line}: bad timestamp {raw_ts:?}")))?;
        let (minute, second) = (
            stamp.local.hour() * 60 + stamp.local.minute(),
            stamp.local.second(),
        );
        if minute % 15 != 0 || second != 0 {
            return Err(Error::Schema(format!(
                "line {line}: timestamp {raw_ts:?} is not on a quarter hour"
            )));
        }
        let day = stamp.local.date();
        let slot0 = (minute / 15) as usize;
        if let (Some(off), TimezonePolicy::WallClock) = (stamp.offset, policy) {
            offsets.entry(day).or_default().insert(off);
        }
        let zone = rec.get(zone_col).unwrap_or_default().to_string();
        let z = *zone_idx.entry(zone.clone()).or_insert_with(|| {
            zones.push(zone);
            zones.len() - 1
        });
        let mut q = Vec::with_capacity(n_q);
        q.push(match actual_col {
            Some(c) => parse_value(rec.get(c).unwrap_or_default(), line, "actual")?,
            None => None,
        });
        for (e, &c) in experts.iter().zip(&expert_cols) {
            q.push(parse_value(
                rec.get(c).unwrap_or_default(),
                line,
                &e.column,
            )?);
        }
        if cells
            .entry((z, day, slot0))
            .or_default()
            .insert(stamp.instant, q)
            .is_some()
        {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::info!("{duplicates} duplicate row(s) replaced (last wins)");
    }
    if zones.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }

    let first = cells.keys().map(|k| k.1).min().expect("non-empty");
    let last = cells.keys().map(|k| k.1).max().expect("non-empty");
    let n_days = (last - first).num_days() as usize + 1;
    let dst_days: BTreeSet<NaiveDate> = offsets
        .iter()
        .filter(|(_, o)| o.len() > 1)
        .map(|(d, _)| *d)
        .collect();

    // quantity -> zone -> day -> 96 slots
    let mut grids = vec![vec![vec![None; n_days * SLOTS_PER_DAY]; zones.len()]; n_q];
    let mut averaged = 0usize;
    for ((z, day, slot0), by_instant) in &cells {
        let d = (*day - first).num_days() as usize;
        if by_instant.len() > 1 {
            averaged += 1;
        }
        for (q, grid) in grids.iter_mut().enumerate() {
            let present: Vec<f64> = by_instant.values().filter_map(|v| v[q]).collect();
            if !present.is_empty() {
                grid[*z][d * SLOTS_PER_DAY + slot0] =
                    Some(present.iter().sum::<f64>() / present.len() as f64);
            }
        }
    }
    if averaged > 0 {
        log::info!("{averaged} repeated wall-clock slot(s) averaged (DST fall-back)");
    }

    let quantity_names: Vec<String> = std::iter::once("actual".to_string())
        .chain(experts.iter().map(|e| e.expert.clone()))
        .collect();
    let mut missing = Vec::new();
    let mut missing_count = 0usize;
    let mut filled = 0usize;
    let used: Vec<bool> = std::iter::once(actual_col.is_some())
        .chain(expert_cols.iter().map(|_| true))
        .collect();
    for (q, grid) in grids.iter_mut().enumerate() {
        if !used[q] {
            continue;
        }
        for (z, series) in grid.iter_mut().enumerate() {
            for d in 0..n_days {
                let day = first + chrono::Days::new(d as u64);
                let slots = &mut series[d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY];
                if dst_days.contains(&day) {
                    filled += interpolate_short_gaps(slots);
                }
                for (h, v) in slots.iter().enumerate() {
                    if v.is_none() {
                        missing_count += 1;
                        if missing.len() < 10 {
                            let label = if q == 0 {
                                zones[z].clone()
                            } else {
                                format!("{} [{}]", zones[z], quantity_names[q])
                            };
                            missing.push((label, day, h + 1));
                        }
                    }
                }
            }
        }
    }
    if filled > 0 {
        log::info!("{filled} skipped wall-clock slot(s) interpolated (DST spring-forward)");
    }
    if missing_count > 0 {
        return Err(Error::MissingData {
            count: missing_count,
            first: missing,
        });
    }

    let flatten = |grid: &Vec<Vec<Option<f64>>>| -> Vec<f64> {
        grid.iter()
            .flat_map(|s| s.iter().map(|v| v.expect("checked")))
            .collect()
    };
    let panel = match actual_col {
        Some(_) => Some(Panel::new(
            zones.clone(),
            first,
            n_days,
            flatten(&grids[0]),
        )?),
        None => None,
    };
    let forecasts = if experts.is_empty() {
        None
    } else {
        let mut values = Vec::with_capacity(zones.len() * experts.len() * n_days * SLOTS_PER_DAY);
        for z in 0..zones.len() {
            for q in 1..n_q {
                values.extend(grids[q][z].iter().map(|v| v.expect("checked")));
            }
        }
        Some(ForecastSet::new(
            zones.clone(),
            experts.iter().map(|e| e.expert.clone()).collect(),
            first,
            n_days,
            values,
        )?)
    };
    Ok(LoadData { panel, forecasts })
}

/// Fills interior runs of at most [`MAX_DST_GAP`] missing slots by linear
/// interpolation. Returns the number of slots filled.
fn interpolate_short_gaps(slots: &mut [Option<f64>]) -> usize {
    let mut filled = 0;
    let mut h = 0;
    while h < slots.len() {
        if slots[h].is_some() {
            h += 1;
            continue;
        }
        let start = h;
        while h < slots.len() && slots[h].is_none() {
            h += 1;
        }
        let len = h - start;
        if start == 0 || h == slots.len() || len > MAX_DST_GAP {
            continue;
        }
        let (a, b) = (slots[start - 1].unwrap(), slots[h].unwrap());
        for k in 0..len {
            let frac = (k + 1) as f64 / (len + 1) as f64;
            slots[start + k] = Some(a + frac * (b - a));
        }
        filled += len;
    }
    filled
}

fn slot_timestamp(day: NaiveDate, slot0: usize) -> String {
    format!("{day}T{:02}:{:02}:00+00:00", slot0 / 4, (slot0 % 4) * 15)
}

/// Writes the canonical long CSV. Times are the normalized wall-clock slots
/// written with a `+00:00` offset; forecast cells that are unavailable (NaN)
/// are left empty.
pub fn write_canonical_csv<W: std::io::Write>(
    writer: W,
    panel: &Panel,
    forecasts: Option<&ForecastSet>,
) -> Result<()> {
    if let Some(f) = forecasts {
        f.check_aligned(panel)?;
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "zone".into(), "actual_mw".into()];
    if let Some(f) = forecasts {
        if f.expert_ids() == [PROVIDER_EXPERT] {
            header.push("forecast_mw".into());
        } else {
            header.extend(
                f.expert_ids()
                    .iter()
                    .map(|e| format!("{FORECAST_PREFIX}{e}")),
            );
        }
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for d in 0..panel.n_days() {
        let day = panel.date(d);
        for h in 0..SLOTS_PER_DAY {
            for (i, zone) in panel.series_ids().iter().enumerate() {
                row.clear();
                row.push(slot_timestamp(day, h));
                row.push(zone.clone());
                row.push(panel.day(i, d)[h].to_string());
                if let Some(f) = forecasts {
                    for j in 0..f.n_experts() {
                        let v = f.day(i, j, d)[h];
                        row.push(if v.is_nan() {
                            String::new()
                        } else {
                            v.to_string()
                        });
                    }
                }
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
