//! Rolling-origin experiment: re-estimate weights every day on the trailing
//! window, forecast the day, score the lot.

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{run_all_methods, DayCombination, Method};
use crate::error::{Error, Result};
use crate::eval::{
    series_boxplots, series_dm_summary, table_report, BoxStats, DmSummary, EvalRecords, Loss,
    ScoreTable, TableReport,
};
use crate::naive::{with_drw_expert, DRW_EXPERT};
use crate::series::{ForecastSet, Hierarchy, SLOTS_PER_DAY};

use super::config::ExperimentConfig;
use super::dataset::{load_data, Dataset};

/// Per-method box-plot data of one series under one loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBoxplots {
    pub series: String,
    pub loss: Loss,
    pub methods: Vec<(String, BoxStats)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultStore {
    pub config: ExperimentConfig,
    pub hierarchy: Hierarchy,
    /// One entry per evaluation day, in date order.
    pub days: Vec<DayCombination>,
    pub records: EvalRecords,
    pub scores: ScoreTable,
    pub mae_table: TableReport,
    pub mse_table: TableReport,
    pub boxplots: Vec<SeriesBoxplots>,
    /// One DM matrix per series, hierarchy order.
    pub dm: Vec<(String, DmSummary)>,
}

impl ResultStore {
    pub fn table(&self, loss: Loss) -> &TableReport {
        match loss {
            Loss::Absolute => &self.mae_table,
            Loss::Squared => &self.mse_table,
        }
    }

    pub fn dm_for(&self, series: &str) -> Option<&DmSummary> {
        self.dm.iter().find(|(s, _)| s == series).map(|(_, d)| d)
    }
}

pub fn rolling_run(config: &ExperimentConfig) -> Result<ResultStore> {
    config.validate()?;
    let data = load_data(config)?;
    run_experiment(config, &data)
}

/// Experts used for combination, drw appended from actuals when requested.
pub fn combination_experts(config: &ExperimentConfig, data: &Dataset) -> Result<ForecastSet> {
    let base: Vec<String> = config
        .experts
        .iter()
        .filter(|e| *e != DRW_EXPERT)
        .cloned()
        .collect();
    let selected = data.forecasts.select_experts(&base)?;
    let with = with_drw_expert(&selected, &data.panel)?;
    with.select_experts(&config.experts)
}

/// Evaluation days: `[eval_start, eval_end]`, defaulting to the first day
/// with `window_days + 1` days of history and the last day of data.
pub fn evaluation_days(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<NaiveDate>> {
    let panel = &data.panel;
    let first = config
        .eval_start
        .unwrap_or_else(|| panel.start() + Days::new(config.window_days as u64 + 1));
    let last = config.eval_end.unwrap_or_else(|| panel.end());
    if first <= panel.start() {
        return Err(Error::InsufficientHistory {
            first_missing: first.pred_opt().unwrap_or(first),
        });
    }
    if last > panel.end() {
        return Err(Error::IncompleteInput(format!(
            "evaluation ends {last} but data ends {}",
            panel.end()
        )));
    }
    if first > last {
        return Err(Error::Config(format!(
            "evaluation range {first}..={last} is empty"
        )));
    }
    Ok(first.iter_days().take_while(|d| *d <= last).collect())
}

/// Runs the combination for each day (in parallel) and gathers the outputs
/// into evaluation records; base experts other than drw are kept as rows.
pub fn run_forecasts(
    config: &ExperimentConfig,
    data: &Dataset,
) -> Result<(Vec<DayCombination>, EvalRecords)> {
    let fc = combination_experts(config, data)?;
    let days = evaluation_days(config, data)?;
    let mcfg = config.method_config();
    let combos: Vec<DayCombination> = days
        .par_iter()
        .map(|&day| run_all_methods(day, &data.panel, &fc, &data.hierarchy, &mcfg))
        .collect::<Result<_>>()?;
    log::info!("combined {} evaluation days", combos.len());

    let n = data.hierarchy.n();
    let nd = days.len();
    let base: Vec<usize> = (0..fc.n_experts())
        .filter(|&j| fc.expert_ids()[j] != DRW_EXPERT)
        .collect();
    let mut methods: Vec<String> = base.iter().map(|&j| fc.expert_ids()[j].clone()).collect();
    methods.extend(Method::ALL.iter().map(|m| m.as_str().to_string()));

    let cells = n * nd * SLOTS_PER_DAY;
    let mut actuals = vec![0.0; cells];
    let mut forecasts = vec![vec![0.0; cells]; methods.len()];
    for (q, (&day, combo)) in days.iter().zip(&combos).enumerate() {
        let d = data
            .panel
            .day_index(day)
            .expect("evaluation day inside data");
        for i in 0..n {
            let at = (i * nd + q) * SLOTS_PER_DAY;
            let range = at..at + SLOTS_PER_DAY;
            actuals[range.clone()].copy_from_slice(data.panel.day(i, d));
            for (k, &j) in base.iter().enumerate() {
                forecasts[k][range.clone()].copy_from_slice(fc.day(i, j, d));
            }
            for (k, f) in combo.forecasts.iter().enumerate() {
                forecasts[base.len() + k][range.clone()].copy_from_slice(f.series(i));
            }
        }
    }
    let records = EvalRecords {
        series_ids: data.hierarchy.series_ids(),
        days,
        actuals,
        methods,
        forecasts,
    };
    Ok((combos, records))
}

/// Scores, tables, box plots and DM summaries of finished records.
pub struct Evaluation {
    pub scores: ScoreTable,
    pub mae_table: TableReport,
    pub mse_table: TableReport,
    pub boxplots: Vec<SeriesBoxplots>,
    pub dm: Vec<(String, DmSummary)>,
}

pub fn evaluate(
    records: &EvalRecords,
    hierarchy: &Hierarchy,
    benchmark: &str,
    dm_loss: Loss,
    dm_alpha: f64,
) -> Result<Evaluation> {
    let scores = ScoreTable::compute(records, benchmark)?;
    let mae_table = table_report(&scores, hierarchy, Loss::Absolute, true)?;
    let mse_table = table_report(&scores, hierarchy, Loss::Squared, true)?;
    let mut boxplots = Vec::new();
    for loss in [Loss::Absolute, Loss::Squared] {
        for (i, s) in records.series_ids.iter().enumerate() {
            boxplots.push(SeriesBoxplots {
                series: s.clone(),
                loss,
                methods: series_boxplots(&scores, i, loss)?,
            });
        }
    }
    let dm = (0..records.n_series())
        .into_par_iter()
        .map(|i| {
            Ok((
                records.series_ids[i].clone(),
                series_dm_summary(records, i, dm_loss, dm_alpha)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        scores,
        mae_table,
        mse_table,
        boxplots,
        dm,
    })
}

pub fn run_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<ResultStore> {
    let (days, records) = run_forecasts(config, data)?;
    let ev = evaluate(
        &records,
        &data.hierarchy,
        &config.benchmark,
        config.dm_loss,
        config.dm_alpha,
    )?;
    Ok(ResultStore {
        config: config.clone(),
        hierarchy: data.hierarchy.clone(),
        days,
        records,
        scores: ev.scores,
        mae_table: ev.mae_table,
        mse_table: ev.mse_table,
        boxplots: ev.boxplots,
        dm: ev.dm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::DataSource;
    use crate::io::synth::{synth_generate, ExpertSpec, SynthSpec};

    fn small_config(days: usize) -> ExperimentConfig {
        let spec = SynthSpec {
            days,
            ..SynthSpec::default()
        };
        let mut cfg = ExperimentConfig::new(DataSource::Synth(spec));
        cfg.window_days = 7;
        cfg
    }

    #[test]
    fn one_weight_set_per_day() {
        let cfg = small_config(25);
        let store = rolling_run(&cfg).unwrap();
        assert_eq!(store.days.len(), 25 - 8);
        assert_eq!(store.records.methods.len(), 8);
        assert_eq!(store.scores.mae.len(), 8 * 96 * 8);
        assert!(store.days.iter().all(|d| d.window_days == 7));
    }

    #[test]
    fn exact_window_history_shrinks() {
        let mut cfg = small_config(20);
        let data: Dataset = synth_generate(match &cfg.data {
            DataSource::Synth(s) => s,
            _ => unreachable!(),
        })
        .unwrap()
        .into();
        cfg.min_window_days = 3;
        cfg.eval_start = Some(data.panel.start() + Days::new(7));
        let (days, _) = run_forecasts(&cfg, &data).unwrap();
        assert_eq!(days[0].window_days, 6);
        assert_eq!(days[1].window_days, 7);
    }

    #[test]
    fn perfect_experts_hit_degenerate_benchmark() {
        let spec = SynthSpec {
            days: 20,
            experts: vec![ExpertSpec {
                noise_frac: 0.0,
                total_extra_frac: 0.0,
                ..ExpertSpec::default()
            }],
            day_shock_frac: 0.0,
            slot_noise_frac: 0.0,
            ..SynthSpec::default()
        };
        let mut cfg = ExperimentConfig::new(DataSource::Synth(spec));
        cfg.window_days = 7;
        let err = rolling_run(&cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateBenchmark { .. }), "{err:?}");
    }
}
