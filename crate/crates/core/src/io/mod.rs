//! Data ingestion, synthetic scenarios, configuration, the rolling
//! experiment and result stores.

pub mod config;
pub mod csv;
pub mod dataset;
pub mod experiment;
pub mod store;
pub mod synth;

pub use config::{DataSource, ExperimentConfig, HierarchySpec, HistoryPolicy, Overrides};
pub use csv::{
    parse_load_csv, parse_load_reader, write_canonical_csv, ColumnMapping, ExpertColumn, LoadData,
    TimezonePolicy, PROVIDER_EXPERT,
};
pub use dataset::{load_data, load_dataset, save_dataset, Dataset};
pub use experiment::{
    combination_experts, evaluate, evaluation_days, rolling_run, run_experiment, run_forecasts,
    Evaluation, ResultStore, SeriesBoxplots,
};
pub use store::{config_hash, export_results, read_manifest, read_records, RunManifest};
pub use synth::{
    default_daily_profile, synth_generate, ExpertSpec, SynthSpec, Synthetic, ZoneSpec,
};
