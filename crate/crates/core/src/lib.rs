//! Per-track model selection and evaluation analytics for binary
//! polarization classifiers, computed from prediction-probability files.
//!
//! The crate never trains or runs a model. Everything starts from
//! `id,prob` files (one per track, model and split) and `id,label` gold
//! files:
//!
//! - [`metrics`]: confusion counts, accuracy, binary and macro F1.
//! - [`ensemble`]: weighted soft voting of member probabilities.
//! - [`calibration`]: grid search over mixture weight and threshold.
//! - [`selection`]: the baseline-replacement rule and ledger replay.
//! - [`diagnostics`]: prediction skew, collapse and dev/test shift groups.
//! - [`leaderboard`]: gap to the best participant, ablation and baseline context.
//! - [`fragmentation`]: subwords-per-word ratios and their reduction.
//! - [`io`]: CSV/JSON/JSONL formats and the append-only run ledger.
//! - [`report`]: Markdown tables.

pub mod calibration;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod fragmentation;
pub mod io;
pub mod leaderboard;
pub mod metrics;
pub mod report;
pub mod selection;

pub use error::{Error, ErrorCategory, Result};
pub use exec::ExecMode;

/// Slack applied when a score difference is compared against a policy
/// boundary (gain rule, stability band, window, cutoff). Differences of
/// printed decimals such as `0.87 - 0.85` land a few ulps off the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Rounds half away from zero to `decimals` places; never returns `-0.0`.
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
