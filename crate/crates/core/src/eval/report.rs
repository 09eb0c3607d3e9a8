//! Table and plot data: GA-RMAE table with best / worse-than-benchmark
//! flags, box-plot summaries over horizons, pairwise DM matrices.

use serde::{Deserialize, Serialize};

use crate::combine::Method;
use crate::error::{Error, Result};
use crate::series::{Hierarchy, SLOTS_PER_DAY};

use super::dm::{dm_summary, dm_test, DmResult, DmSummary};
use super::metrics::{ga_rmae, EvalRecords, Loss, ScoreTable};

/// Tukey box-plot statistics with 1.5 × IQR whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_data(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("box plot of no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| (lo_fence..=hi_fence).contains(x))
        .collect();
    Ok(BoxStats {
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: v
            .iter()
            .copied()
            .filter(|x| !(lo_fence..=hi_fence).contains(x))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub values: Vec<f64>,
    pub best: Vec<bool>,
    /// Value above 1: worse than the benchmark.
    pub worse: Vec<bool>,
}

/// GA of relative scores, rows = methods, columns = total, bottoms, BZ, All.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub loss: Loss,
    pub benchmark: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn row(&self, method: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn value(&self, method: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.row(method)?.values[c])
    }

    /// Percentage improvement over the benchmark, `100 (1 - GA)`.
    pub fn improvement_pct(&self, method: &str, column: &str) -> Option<f64> {
        self.value(method, column).map(|v| 100.0 * (1.0 - v))
    }

    /// Plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10}", "method");
        for c in &self.columns {
            out.push_str(&format!("{c:>12}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:<10}", r.method));
            for (k, v) in r.values.iter().enumerate() {
                let mark = match (r.best[k], r.worse[k]) {
                    (true, _) => "*",
                    (_, true) => "!",
                    _ => " ",
                };
                out.push_str(&format!("{:>11.4}{mark}", v));
            }
            out.push('\n');
        }
        out
    }
}

pub const BZ_COLUMN: &str = "BZ";
pub const ALL_COLUMN: &str = "All";

/// Builds the GA table. Requires every procedure in [`Method::ALL`]; the
/// benchmark row is added when `include_benchmark`. The benchmark is flagged
/// best in a column only if it ties the best of the other rows.
pub fn table_report(
    scores: &ScoreTable,
    hierarchy: &Hierarchy,
    loss: Loss,
    include_benchmark: bool,
) -> Result<TableReport> {
    hierarchy.check_series(&scores.series_ids)?;
    let missing: Vec<&str> = Method::ALL
        .iter()
        .map(|m| m.as_str())
        .filter(|m| scores.method_index(m).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteInput(format!(
            "scores missing methods {missing:?}"
        )));
    }
    let t = hierarchy.total_index();
    let bottoms: Vec<usize> = (0..t).collect();
    let all: Vec<usize> = std::iter::once(t).chain(0..t).collect();
    let mut groups: Vec<(String, Vec<usize>)> = vec![(hierarchy.total_id().to_string(), vec![t])];
    groups.extend(
        hierarchy
            .bottom_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), vec![i])),
    );
    groups.push((BZ_COLUMN.into(), bottoms));
    groups.push((ALL_COLUMN.into(), all));

    let mut labels: Vec<String> = Vec::new();
    if include_benchmark {
        labels.push(scores.benchmark.clone());
    }
    labels.extend(Method::ALL.iter().map(|m| m.as_str().to_string()));

    let mut rows = Vec::with_capacity(labels.len());
    for label in &labels {
        let k = scores
            .method_index(label)
            .ok_or_else(|| Error::IncompleteInput(format!("no scores for {label:?}")))?;
        let values = groups
            .iter()
            .map(|(_, s)| ga_rmae(&scores.relative(loss, k, s)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(TableRow {
            method: label.clone(),
            worse: values.iter().map(|&v| v > 1.0).collect(),
            best: vec![false; values.len()],
            values,
        });
    }
    for c in 0..groups.len() {
        let best = rows
            .iter()
            .filter(|r| r.method != scores.benchmark)
            .map(|r| r.values[c])
            .fold(f64::INFINITY, f64::min);
        for r in &mut rows {
            r.best[c] = r.values[c] == best;
        }
    }
    Ok(TableReport {
        loss,
        benchmark: scores.benchmark.clone(),
        columns: groups.into_iter().map(|(c, _)| c).collect(),
        rows,
    })
}

/// Box-plot data of relative scores for one series, per method.
pub fn series_boxplots(
    scores: &ScoreTable,
    series: usize,
    loss: Loss,
) -> Result<Vec<(String, BoxStats)>> {
    scores
        .methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            Ok((
                m.clone(),
                boxplot_data(&scores.relative(loss, k, &[series]))?,
            ))
        })
        .collect()
}

/// One-sided DM results for every ordered method pair and horizon of one
/// series, `results[a][b][h]`.
pub fn pairwise_dm(
    records: &EvalRecords,
    series: usize,
    loss: Loss,
) -> Result<Vec<Vec<Vec<DmResult>>>> {
    let nm = records.methods.len();
    let errors: Vec<Vec<Vec<f64>>> = (0..nm)
        .map(|k| {
            (0..SLOTS_PER_DAY)
                .map(|h| records.errors(k, series, h))
                .collect()
        })
        .collect();
    let mut out = vec![vec![Vec::new(); nm]; nm];
    for a in 0..nm {
        for b in 0..nm {
            if a == b {
                continue;
            }
            out[a][b] = (0..SLOTS_PER_DAY)
                .map(|h| dm_test(&errors[a][h], &errors[b][h], loss, true))
                .collect::<Result<_>>()?;
        }
    }
    Ok(out)
}

/// Percentage-of-horizons DM matrix for one series.
pub fn series_dm_summary(
    records: &EvalRecords,
    series: usize,
    loss: Loss,
    alpha: f64,
) -> Result<DmSummary> {
    let results = pairwise_dm(records, series, loss)?;
    dm_summary(&records.methods, alpha, |a, b| {
        Some(results[a][b].as_slice())
    })
}
