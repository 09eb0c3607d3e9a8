//! Result store on disk: plain CSV / JSON files plus a manifest tying them
//! to the config and seed. Output bytes depend only on the store contents.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::EvalRecords;
use crate::series::SLOTS_PER_DAY;

use super::config::{ExperimentConfig, HierarchySpec};
use super::experiment::ResultStore;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const WEIGHTS_FILE: &str = "weights.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const TABLE_MAE_FILE: &str = "table_mae.json";
pub const TABLE_MSE_FILE: &str = "table_mse.json";
pub const TABLE_TEXT_FILE: &str = "table.txt";
pub const BOXPLOT_FILE: &str = "boxplot.csv";
pub const DM_FILE: &str = "dm.csv";

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub hierarchy: HierarchySpec,
    pub benchmark: String,
    pub methods: Vec<String>,
    pub eval_start: NaiveDate,
    pub eval_end: NaiveDate,
    pub n_days: usize,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

/// SHA-256 of the config's JSON serialization, hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, dir: &Path, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .map_err(|e| Error::io(dir.join(name), e))?;
    finish(w, dir, name)
}

#[derive(Serialize)]
struct WeightsLine<'a> {
    day: NaiveDate,
    window_days: usize,
    lambda: f64,
    cov_repaired: bool,
    /// method → `m` rows of `n` weights.
    weights: Vec<(&'a str, Vec<Vec<f64>>)>,
}

/// Writes every output file into `dir`, creating it if needed. Returns the
/// paths written.
pub fn export_results(store: &ResultStore, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rec = &store.records;
    let (ns, nd) = (rec.n_series(), rec.n_days());

    let mut w = csv::Writer::from_writer(create(dir, FORECASTS_FILE)?);
    let mut header = vec![
        "day".to_string(),
        "slot".into(),
        "series".into(),
        "actual".into(),
    ];
    header.extend(rec.methods.iter().cloned());
    w.write_record(&header)?;
    for (q, day) in rec.days.iter().enumerate() {
        let day = day.to_string();
        for h in 0..SLOTS_PER_DAY {
            for i in 0..ns {
                let at = (i * nd + q) * SLOTS_PER_DAY + h;
                let mut row = vec![day.clone(), (h + 1).to_string(), rec.series_ids[i].clone()];
                row.push(rec.actuals[at].to_string());
                row.extend(rec.forecasts.iter().map(|f| f[at].to_string()));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()
        .map_err(|e| Error::io(dir.join(FORECASTS_FILE), e))?;

    let mut w = create(dir, WEIGHTS_FILE)?;
    for combo in &store.days {
        let line = WeightsLine {
            day: combo.origin_day,
            window_days: combo.window_days,
            lambda: combo.lambda,
            cov_repaired: combo.cov_repaired,
            weights: combo
                .weights
                .iter()
                .map(|cw| {
                    let rows = (0..cw.omega.nrows())
                        .map(|r| cw.omega.row(r).iter().copied().collect())
                        .collect();
                    (cw.method.as_str(), rows)
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(dir.join(WEIGHTS_FILE), e))?;
    }
    finish(w, dir, WEIGHTS_FILE)?;

    let sc = &store.scores;
    let mut w = csv::Writer::from_writer(create(dir, SCORES_FILE)?);
    w.write_record(["series", "horizon", "method", "mae", "mse", "rmae", "rmse"])?;
    for (i, s) in sc.series_ids.iter().enumerate() {
        for h in 0..SLOTS_PER_DAY {
            for (k, m) in sc.methods.iter().enumerate() {
                let x = sc.index(i, h, k);
                w.write_record([
                    s.clone(),
                    (h + 1).to_string(),
                    m.clone(),
                    sc.mae[x].to_string(),
                    sc.mse[x].to_string(),
                    sc.rmae[x].to_string(),
                    sc.rmse[x].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(dir.join(SCORES_FILE), e))?;

    write_json(dir, TABLE_MAE_FILE, &store.mae_table)?;
    write_json(dir, TABLE_MSE_FILE, &store.mse_table)?;
    let mut w = create(dir, TABLE_TEXT_FILE)?;
    let text = format!(
        "GA-RMAE (benchmark {b})\n{}\nGA-RMSE (benchmark {b})\n{}",
        store.mae_table.render(),
        store.mse_table.render(),
        b = store.mae_table.benchmark
    );
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(dir.join(TABLE_TEXT_FILE), e))?;
    finish(w, dir, TABLE_TEXT_FILE)?;

    let mut w = csv::Writer::from_writer(create(dir, BOXPLOT_FILE)?);
    w.write_record([
        "series",
        "loss",
        "method",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "lower_whisker",
        "upper_whisker",
        "n_outliers",
    ])?;
    for bp in &store.boxplots {
        let loss = match bp.loss {
            crate::eval::Loss::Absolute => "absolute",
            crate::eval::Loss::Squared => "squared",
        };
        for (m, b) in &bp.methods {
            w.write_record([
                bp.series.clone(),
                loss.into(),
                m.clone(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
                b.lower_whisker.to_string(),
                b.upper_whisker.to_string(),
                b.outliers.len().to_string(),
            ])?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(dir.join(BOXPLOT_FILE), e))?;

    let mut w = csv::Writer::from_writer(create(dir, DM_FILE)?);
    w.write_record([
        "series",
        "method_a",
        "method_b",
        "alpha",
        "percent_horizons",
    ])?;
    for (s, summary) in &store.dm {
        for (a, ma) in summary.methods.iter().enumerate() {
            for (b, mb) in summary.methods.iter().enumerate() {
                if let Some(c) = summary.cells[a][b] {
                    w.write_record([
                        s.clone(),
                        ma.clone(),
                        mb.clone(),
                        summary.alpha.to_string(),
                        c.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(dir.join(DM_FILE), e))?;

    let files: Vec<String> = [
        FORECASTS_FILE,
        WEIGHTS_FILE,
        SCORES_FILE,
        TABLE_MAE_FILE,
        TABLE_MSE_FILE,
        TABLE_TEXT_FILE,
        BOXPLOT_FILE,
        DM_FILE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(&store.config)?,
        seed: store.config.effective_seed(),
        hierarchy: HierarchySpec::from(&store.hierarchy),
        benchmark: store.config.benchmark.clone(),
        methods: rec.methods.clone(),
        eval_start: rec.days[0],
        eval_end: rec.days[nd - 1],
        n_days: nd,
        files: files.clone(),
        config: store.config.clone(),
    };
    write_json(dir, MANIFEST_FILE, &manifest)?;
    Ok(std::iter::once(MANIFEST_FILE.to_string())
        .chain(files)
        .map(|f| dir.join(f))
        .collect())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<RunManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let m: RunManifest = serde_json::from_reader(std::io::BufReader::new(file))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "result store format {} is not supported (expected {FORMAT_VERSION})",
            m.format_version
        )));
    }
    Ok(m)
}

/// Rebuilds evaluation records from a store's forecasts file.
pub fn read_records(dir: impl AsRef<Path>) -> Result<(RunManifest, EvalRecords)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let series_ids = manifest.hierarchy.build()?.series_ids();
    let days: Vec<NaiveDate> = manifest
        .eval_start
        .iter_days()
        .take(manifest.n_days)
        .collect();
    let (ns, nd, nm) = (series_ids.len(), days.len(), manifest.methods.len());
    let cells = ns * nd * SLOTS_PER_DAY;
    let mut actuals = vec![f64::NAN; cells];
    let mut forecasts = vec![vec![f64::NAN; cells]; nm];

    let path = dir.join(FORECASTS_FILE);
    let mut rdr = csv::Reader::from_path(&path)?;
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = ["day", "slot", "series", "actual"]
        .into_iter()
        .chain(manifest.methods.iter().map(|s| s.as_str()))
        .collect();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let num = |raw: &str, line: u64| -> Result<f64> {
        raw.parse()
            .map_err(|_| Error::Schema(format!("{}:{line}: bad number {raw:?}", path.display())))
    };
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Schema(format!("{}:{line}: bad {what}", path.display()));
        let day: NaiveDate = row[0].parse().map_err(|_| bad("day"))?;
        let q = (day - manifest.eval_start).num_days();
        let slot: usize = row[1].parse().map_err(|_| bad("slot"))?;
        let i = series_ids
            .iter()
            .position(|s| s == &row[2])
            .ok_or_else(|| bad("series"))?;
        if q < 0 || q as usize >= nd || !(1..=SLOTS_PER_DAY).contains(&slot) {
            return Err(bad("day or slot"));
        }
        let at = (i * nd + q as usize) * SLOTS_PER_DAY + slot - 1;
        actuals[at] = num(&row[3], line)?;
        for (k, f) in forecasts.iter_mut().enumerate() {
            f[at] = num(&row[4 + k], line)?;
        }
    }
    if actuals.iter().any(|v| v.is_nan()) {
        return Err(Error::IncompleteInput(format!(
            "{} is missing rows",
            path.display()
        )));
    }
    let records = EvalRecords {
        series_ids,
        days,
        actuals,
        methods: manifest.methods.clone(),
        forecasts,
    };
    Ok((manifest, records))
}
