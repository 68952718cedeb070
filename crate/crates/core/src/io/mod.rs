//! File formats.
//!
//! - predictions: CSV `id,prob`, probabilities written with six decimals
//! - gold labels: CSV `id,label` with labels `0` (neutral) / `1` (polarized)
//! - analysis tables: small headed CSVs (leaderboard, shift, ablation, ...)
//! - registry: one JSON document describing every track's candidates and
//!   final configuration
//! - ledger: append-only JSONL of evaluated runs
//!
//! All text is UTF-8 with LF line endings. Every loader either returns the
//! whole file or a typed error naming the offending line.

mod ledger;
mod registry;
mod tables;

pub use ledger::{resolve_ledger_path, Ledger, RunRecord, LEDGER_DIR_ENV};
pub use registry::{Registry, RegistryCandidate, TrackEntry};
pub use tables::{
    emit_counts, emit_gold, emit_predictions, load_counts, load_gold, load_predictions,
    load_rows, read_gold, read_predictions, write_rows, AblationCsvRow, ContextCsvRow,
    LeaderboardCsvRow, RatioCsvRow, ReplayCsvRow, ShiftCsvRow,
};
