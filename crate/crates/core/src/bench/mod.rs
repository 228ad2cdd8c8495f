//! Experiment runner, CSV output and SVG plotting.

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{ExperimentConfig, GameSource};
pub use plot::{emit_plot, load_series, render_svg, seed_csvs_in, ValueSeries};
pub use runner::{
    max_bonus, read_seed_csv, run_experiment, run_seed, summarize, write_outputs, EpisodeRow, ExperimentOutcome,
    SeedRun, SummaryRow, CSV_COLUMNS, SUMMARY_CSV,
};
