//! Accuracy scoring, Diebold–Mariano tests and report data.

pub mod dm;
pub mod metrics;
pub mod report;

pub use dm::{
    dm_from_differential, dm_summary, dm_test, hac_variance, lag_window, DmResult, DmSummary,
};
pub use metrics::{ga_rmae, mae, mean_loss, mse, rmae, EvalRecords, Loss, ScoreTable};
pub use report::{
    boxplot_data, pairwise_dm, series_boxplots, series_dm_summary, table_report, BoxStats,
    TableReport, TableRow, ALL_COLUMN, BZ_COLUMN,
};
