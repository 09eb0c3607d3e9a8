use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loadcomb::covariance::{Shrinkage, ZeroPattern};
use loadcomb::eval::{dm_test, DmSummary, EvalRecords, Loss};
use loadcomb::io::{
    export_results, parse_load_csv, read_records, rolling_run, save_dataset, synth_generate,
    ColumnMapping, Dataset, ExperimentConfig, HierarchySpec, Overrides, SynthSpec, TimezonePolicy,
};
use loadcomb::series::SLOTS_PER_DAY;
use loadcomb::{Error, Result};

#[derive(Parser)]
#[command(
    name = "loadcomb",
    version,
    about = "Multi-task combination of zonal load forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a provider CSV into a canonical dataset directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        total: String,
        /// Bottom-level zones, comma separated, in stacking order.
        #[arg(long, value_delimiter = ',', required = true)]
        bottoms: Vec<String>,
        /// TOML file with a column mapping.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value = "wall-clock")]
        timezone: TimezonePolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// TOML scenario; defaults apply when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the rolling experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        window_days: Option<usize>,
        /// none, cross-both or cross-variable
        #[arg(long)]
        zero_pattern: Option<ZeroPattern>,
        /// auto or a value in [0, 1]
        #[arg(long)]
        lambda: Option<Shrinkage>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the GA table of a result store.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "absolute")]
        loss: Loss,
        /// Benchmark row; defaults to the store's.
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Pairwise Diebold–Mariano tests from a result store.
    Dm {
        #[arg(long)]
        store: PathBuf,
        /// Series to test; defaults to the total.
        #[arg(long)]
        series: Option<String>,
        #[arg(long, default_value = "absolute")]
        loss: Loss,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Print per-horizon results for one ordered pair `a,b`.
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn ingest(
    input: &Path,
    hierarchy: HierarchySpec,
    mapping: Option<&Path>,
    timezone: TimezonePolicy,
    out: &Path,
) -> Result<()> {
    let mapping: ColumnMapping = match mapping {
        Some(p) => read_toml(p)?,
        None => ColumnMapping::default(),
    };
    let data = parse_load_csv(input, &mapping, timezone)?;
    let panel = data
        .panel
        .ok_or_else(|| Error::Schema("no actual load column".into()))?;
    let fc = data
        .forecasts
        .ok_or_else(|| Error::Schema("no forecast column".into()))?;
    let ds = Dataset::new(hierarchy.build()?, &panel, &fc)?;
    save_dataset(out, &ds)?;
    println!(
        "wrote {} series x {} days ({}..={}) to {}",
        ds.panel.n_series(),
        ds.panel.n_days(),
        ds.panel.start(),
        ds.panel.end(),
        out.display()
    );
    Ok(())
}

fn synth(spec: Option<&Path>, seed: Option<u64>, days: Option<usize>, out: &Path) -> Result<()> {
    let mut spec: SynthSpec = match spec {
        Some(p) => read_toml(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(d) = days {
        spec.days = d;
    }
    let ds: Dataset = synth_generate(&spec)?.into();
    save_dataset(out, &ds)?;
    println!(
        "wrote synthetic dataset (seed {}) to {}",
        spec.seed,
        out.display()
    );
    Ok(())
}

fn run(config: &Path, overrides: Overrides) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    cfg.apply_overrides(&overrides)?;
    let store = rolling_run(&cfg)?;
    let files = export_results(&store, &cfg.output_dir)?;
    print!("{}", store.mae_table.render());
    println!(
        "{} days evaluated; {} files in {}",
        store.days.len(),
        files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn report(store: &Path, loss: Loss, benchmark: Option<String>, json: bool) -> Result<()> {
    let (manifest, records) = read_records(store)?;
    let hierarchy = manifest.hierarchy.build()?;
    let benchmark = benchmark.unwrap_or(manifest.benchmark);
    let scores = loadcomb::eval::ScoreTable::compute(&records, &benchmark)?;
    let table = loadcomb::eval::table_report(&scores, &hierarchy, loss, true)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&table)?);
    } else {
        print!("{}", table.render());
    }
    Ok(())
}

fn print_summary(series: &str, s: &DmSummary) {
    let width = s.methods.iter().map(|m| m.len()).max().unwrap_or(4).max(4) + 2;
    println!(
        "series {series}, alpha {}: % of horizons where row beats column",
        s.alpha
    );
    print!("{:<width$}", "");
    for m in &s.methods {
        print!("{m:>width$}");
    }
    println!();
    for (a, m) in s.methods.iter().enumerate() {
        print!("{m:<width$}");
        for c in &s.cells[a] {
            match c {
                Some(v) => print!("{v:>width$}"),
                None => print!("{:>width$}", "-"),
            }
        }
        println!();
    }
}

fn method_pair(records: &EvalRecords, a: &str, b: &str) -> Result<(usize, usize)> {
    let find = |m: &str| {
        records
            .method_index(m)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {m:?}")))
    };
    Ok((find(a)?, find(b)?))
}

fn dm(
    store: &Path,
    series: Option<String>,
    loss: Loss,
    alpha: f64,
    pair: Option<Vec<String>>,
    json: bool,
) -> Result<()> {
    let (manifest, records) = read_records(store)?;
    let series = series.unwrap_or(manifest.hierarchy.total);
    let i = records
        .series_index(&series)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown series {series:?}")))?;
    if let Some(pair) = pair {
        if pair.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "--pair takes two methods, got {}",
                pair.len()
            )));
        }
        let (a, b) = method_pair(&records, &pair[0], &pair[1])?;
        let results = (0..SLOTS_PER_DAY)
            .map(|h| {
                dm_test(
                    &records.errors(a, i, h),
                    &records.errors(b, i, h),
                    loss,
                    true,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        if json {
            println!("{}", serde_json::to_string_pretty(&results)?);
        } else {
            println!("slot,statistic,p_value");
            for (h, r) in results.iter().enumerate() {
                println!("{},{},{}", h + 1, r.statistic, r.p_value);
            }
        }
        return Ok(());
    }
    let summary = loadcomb::eval::series_dm_summary(&records, i, loss, alpha)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print_summary(&series, &summary);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            input,
            total,
            bottoms,
            mapping,
            timezone,
            out,
        } => ingest(
            &input,
            HierarchySpec { total, bottoms },
            mapping.as_deref(),
            timezone,
            &out,
        ),
        Command::Synth {
            spec,
            seed,
            days,
            out,
        } => synth(spec.as_deref(), seed, days, &out),
        Command::Run {
            config,
            seed,
            window_days,
            zero_pattern,
            lambda,
            out,
        } => run(
            &config,
            Overrides {
                seed,
                window_days,
                zero_pattern,
                lambda,
                output_dir: out,
            },
        ),
        Command::Report {
            store,
            loss,
            benchmark,
            json,
        } => report(&store, loss, benchmark, json),
        Command::Dm {
            store,
            series,
            loss,
            alpha,
            pair,
            json,
        } => dm(&store, series, loss, alpha, pair, json),
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
