//! Experiment orchestration: density sweeps, seeding, aggregation and the
//! CSV/JSON output files.

mod cell;
mod config;
mod output;
mod replay;
mod sweep;

pub use cell::{run_cell, CellResult, EpisodeSummary};
pub use config::{CellSpec, ExperimentConfig};
pub use output::{
    read_episodes_csv, summarize, write_episodes_csv, write_steps_csv, write_summary_csv, EpisodeRow,
    SummaryRow, EPISODES_HEADER, STEPS_HEADER, SUMMARY_HEADER,
};
pub use replay::{replay_check, ReplayReport, REPLAY_TOL};
pub use sweep::{run_and_write, sweep, CellStatus, Manifest, ManifestCell, SweepReport, MANIFEST_VERSION};
