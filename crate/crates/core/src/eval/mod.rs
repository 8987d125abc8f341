//! Expanding-window evaluation: splits, grid search, metrics, Diebold-Mariano
//! tests and summary tables.

pub mod dm;
pub mod grid;
pub mod metrics;
pub mod run;
pub mod splits;
pub mod tables;

pub use dm::{dm_test, DmResult, MONTHLY_BANDWIDTH, MYA_BANDWIDTH};
pub use grid::{grid_search, ModelFamily, ModelSpec, Selection};
pub use metrics::{aggregate_mya, score_monthly, score_mya, two_step_average, MetricBlock};
pub use run::{
    cell_seed, external_cell, load_results, read_results, run_cell, run_single_split, save_results,
    write_results, CellResult,
};
pub use splits::{make_splits, make_splits_checked, EvalSplit, MyRange, N_SPLITS};
pub use tables::{
    build_report, commodity_mae, mya_comparison, overall_metrics, pairwise_dm, rank_table, ratio_table,
    win_rate_table, MyaErrors, PairwiseDm, RankRow, RatioRow, ReportOptions, TextTable, UsdaWindow,
    WinRateRow,
};
