//! Architecture selection against the per-track baseline.
//!
//! A candidate replaces the baseline when it gains at least `min_gain`
//! development macro F1. Failing that, a candidate may still be adopted for
//! a clearly more balanced precision/recall profile at near-equal macro F1.
//! Otherwise the baseline stays.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::BOUNDARY_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Baseline,
    Specialist,
    Generalist,
    Ensemble,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Baseline => "baseline",
            Role::Specialist => "specialist",
            Role::Generalist => "generalist",
            Role::Ensemble => "ensemble",
        })
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Role::Baseline),
            "specialist" => Ok(Role::Specialist),
            "generalist" => Ok(Role::Generalist),
            "ensemble" => Ok(Role::Ensemble),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub model_id: String,
    pub role: Role,
    pub dev_report: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    /// Minimum macro-F1 gain over the baseline (inclusive).
    pub min_gain: f64,
    /// How far below the baseline's macro F1 a balance-clause candidate may sit.
    pub balance_slack: f64,
    /// Required reduction of `|P_macro - R_macro|` for the balance clause.
    pub min_balance_improvement: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            min_gain: 0.02,
            balance_slack: 0.01,
            min_balance_improvement: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DeltaGain,
    Balance,
    BaselineRetained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub track: String,
    pub chosen: String,
    pub chosen_role: Role,
    pub rule_fired: Rule,
    pub delta_dev: f64,
    pub balance_gap_baseline: f64,
    pub balance_gap_chosen: f64,
}

/// Signed percentage points, e.g. `+10.60%`.
pub fn format_pp(delta: f64, decimals: usize) -> String {
    let pp = delta * 100.0;
    // avoid "-0.00"
    let pp = if format!("{:.*}", decimals, pp.abs()).trim_matches(['0', '.']).is_empty() {
        0.0
    } else {
        pp
    };
    format!("{:+.*}%", decimals, pp)
}

fn prefer_gain(a: &CandidateEvaluation, b: &CandidateEvaluation) -> Ordering {
    // Greater = preferred: higher macro F1, then smaller gap, then smaller id.
    a.dev_report
        .f1_macro
        .total_cmp(&b.dev_report.f1_macro)
        .then_with(|| {
            b.dev_report
                .balance_gap()
                .total_cmp(&a.dev_report.balance_gap())
        })
        .then_with(|| b.model_id.cmp(&a.model_id))
}

fn prefer_balance(a: &CandidateEvaluation, b: &CandidateEvaluation) -> Ordering {
    b.dev_report
        .balance_gap()
        .total_cmp(&a.dev_report.balance_gap())
        .then_with(|| a.dev_report.f1_macro.total_cmp(&b.dev_report.f1_macro))
        .then_with(|| b.model_id.cmp(&a.model_id))
}

/// Applies the selection rule for one track.
pub fn decide(
    track: &str,
    baseline: &CandidateEvaluation,
    candidates: &[CandidateEvaluation],
    policy: &SelectionPolicy,
) -> Result<SelectionDecision> {
    if baseline.role != Role::Baseline {
        return Err(Error::NoBaseline);
    }
    let mut seen = BTreeSet::from([baseline.model_id.as_str()]);
    for c in candidates {
        if c.role == Role::Baseline {
            return Err(Error::MultipleBaselines(c.model_id.clone()));
        }
        if !seen.insert(c.model_id.as_str()) {
            return Err(Error::DuplicateModelId(c.model_id.clone()));
        }
    }

    let base_f1 = baseline.dev_report.f1_macro;
    let base_gap = baseline.dev_report.balance_gap();
    let delta = |c: &CandidateEvaluation| c.dev_report.f1_macro - base_f1;

    let by_gain = candidates
        .iter()
        .filter(|c| delta(c) >= policy.min_gain - BOUNDARY_TOLERANCE)
        .max_by(|a, b| prefer_gain(a, b));
    let by_balance = || {
        candidates
            .iter()
            .filter(|c| {
                delta(c) >= -policy.balance_slack - BOUNDARY_TOLERANCE
                    && base_gap - c.dev_report.balance_gap()
                        >= policy.min_balance_improvement - BOUNDARY_TOLERANCE
            })
            .max_by(|a, b| prefer_balance(a, b))
    };

    let (chosen, rule) = match by_gain {
        Some(c) => (c, Rule::DeltaGain),
        None => match by_balance() {
            Some(c) => (c, Rule::Balance),
            None => (baseline, Rule::BaselineRetained),
        },
    };

    Ok(SelectionDecision {
        track: track.to_string(),
        chosen: chosen.model_id.clone(),
        chosen_role: chosen.role,
        rule_fired: rule,
        delta_dev: delta(chosen),
        balance_gap_baseline: base_gap,
        balance_gap_chosen: chosen.dev_report.balance_gap(),
    })
}

/// Like [`decide`], with the baseline picked out of `evaluations` by role.
pub fn decide_among(
    track: &str,
    evaluations: &[CandidateEvaluation],
    policy: &SelectionPolicy,
) -> Result<SelectionDecision> {
    let mut baselines = evaluations.iter().filter(|c| c.role == Role::Baseline);
    let baseline = baselines.next().ok_or(Error::NoBaseline)?;
    if let Some(extra) = baselines.next() {
        return Err(Error::MultipleBaselines(extra.model_id.clone()));
    }
    let rest: Vec<CandidateEvaluation> = evaluations
        .iter()
        .filter(|c| c.role != Role::Baseline)
        .cloned()
        .collect();
    decide(track, baseline, &rest, policy)
}

/// One printed row of a selection ledger: baseline and adopted dev scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub track: String,
    #[serde(default)]
    pub architecture: Option<String>,
    #[serde(default)]
    pub transition: Option<Role>,
    pub baseline_score: f64,
    pub chosen_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub track: String,
    pub architecture: Option<String>,
    pub transition: Option<Role>,
    pub baseline_score: f64,
    pub chosen_score: f64,
    pub delta_dev: f64,
    pub satisfies_rule: bool,
}

/// Recomputes each row's delta and flags rows that break the gain rule.
pub fn ledger_replay(entries: &[LedgerEntry], policy: &SelectionPolicy) -> Vec<ReplayRow> {
    entries
        .iter()
        .map(|e| {
            let delta_dev = e.chosen_score - e.baseline_score;
            ReplayRow {
                track: e.track.clone(),
                architecture: e.architecture.clone(),
                transition: e.transition,
                baseline_score: e.baseline_score,
                chosen_score: e.chosen_score,
                delta_dev,
                satisfies_rule: delta_dev >= policy.min_gain - BOUNDARY_TOLERANCE,
            }
        })
        .collect()
}
