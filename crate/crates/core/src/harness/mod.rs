//! Batch execution, persistence and report generation.

mod config;
mod corpus;
mod desk;
mod grid;
mod reports;
mod run;

pub use config::{AttackKind, ModelKind, ModelSpec, RunConfig};
pub use corpus::{write_corpus, Corpus, CorpusEntry, LABELS_FILE};
pub use desk::{desk_corpus, DeskCorpusConfig, CLASS_NAMES};
pub use grid::{haze_contact_sheet, haze_grid_cells, heatmap};
pub use reports::{
    correlation_report, success_sets, transfer_report, CORRELATION_CSV, CORRELATION_PNG, TRANSFER_CSV,
    TRANSFER_JSON,
};
pub use run::{
    read_records, read_summary, run_attack_batch, strip_wall_time, write_summary, RunFailure, RunRecord,
    RunSummary, ADV_DIR, RECORD_SCHEMA, RESULTS_FILE, SUMMARY_FILE, SUMMARY_SCHEMA, WALL_TIME_FIELDS,
};
