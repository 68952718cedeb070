//! Exhaustive search over ensemble weights and decision thresholds,
//! scored by development macro F1 on the full dev set.
//!
//! Ties between cells are broken toward the least aggressive calibration:
//! highest macro F1, then smallest `|tau - 0.5|`, then smallest
//! `|alpha - 0.5|`, then smallest tau, then smallest alpha. Distances are
//! compared after quantizing to 1e-9 so that, e.g., 0.45 and 0.55 are
//! treated as equally far from 0.5.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    check_compatible, check_weights, combine, soft_vote, uniform_weights, EnsembleConfig,
    MemberWeight,
};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::metrics::{
    check_threshold, evaluate_run, label_at, ConfusionCounts, GoldLabels, Label, MetricReport,
    PredictionRun,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub alpha_values: Vec<f64>,
    pub tau_values: Vec<f64>,
}

impl Default for SearchGrid {
    /// alpha in 0.00..=1.00 and tau in 0.30..=0.70, both in steps of 0.05.
    fn default() -> Self {
        Self {
            alpha_values: twentieths(0, 20),
            tau_values: twentieths(6, 14),
        }
    }
}

fn twentieths(from: u32, to: u32) -> Vec<f64> {
    (from..=to).map(|i| f64::from(i) / 20.0).collect()
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} axis is empty")));
    }
    for &v in values {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidGrid(format!("{name} value {v} outside [0, 1]")));
        }
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!("{name} axis is not strictly ascending")));
    }
    Ok(())
}

impl SearchGrid {
    pub fn new(alpha_values: Vec<f64>, tau_values: Vec<f64>) -> Result<Self> {
        let grid = Self {
            alpha_values,
            tau_values,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("alpha", &self.alpha_values)?;
        check_axis("tau", &self.tau_values)
    }

    pub fn cell_count(&self) -> usize {
        self.alpha_values.len() * self.tau_values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    /// Weight of the first member.
    pub alpha: f64,
    pub tau: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_config: EnsembleConfig,
    pub best_dev_report: MetricReport,
    pub full_surface: Vec<SurfaceCell>,
    /// Set when the built-in grid was used; that grid is a reconstruction,
    /// not the list of configurations originally tried.
    pub default_grid: bool,
}

impl SearchResult {
    pub fn best_cell(&self) -> SurfaceCell {
        SurfaceCell {
            alpha: self.best_config.members[0].weight,
            tau: self.best_config.tau,
            macro_f1: self.best_dev_report.f1_macro,
        }
    }

    /// `alpha,tau,macro_f1` with six decimals, one row per cell.
    pub fn surface_csv(&self) -> String {
        let mut out = String::from("alpha,tau,macro_f1\n");
        for c in &self.full_surface {
            let _ = writeln!(out, "{:.6},{:.6},{:.6}", c.alpha, c.tau, c.macro_f1);
        }
        out
    }
}

fn quantized_distance(x: f64) -> i64 {
    ((x - 0.5).abs() * 1e9).round() as i64
}

/// Ordering where `Greater` means "preferred".
fn preference(a: &SurfaceCell, b: &SurfaceCell) -> Ordering {
    a.macro_f1
        .total_cmp(&b.macro_f1)
        .then_with(|| quantized_distance(b.tau).cmp(&quantized_distance(a.tau)))
        .then_with(|| quantized_distance(b.alpha).cmp(&quantized_distance(a.alpha)))
        .then_with(|| b.tau.total_cmp(&a.tau))
        .then_with(|| b.alpha.total_cmp(&a.alpha))
}

/// Gold labels and member probabilities laid out in gold-id order.
struct Aligned {
    gold: Vec<Label>,
    members: Vec<Vec<f64>>,
}

fn align(gold: &GoldLabels, members: &[&PredictionRun]) -> Result<Aligned> {
    check_compatible(members)?;
    let first = members[0];
    for id in gold.entries().keys() {
        if first.get(id).is_none() {
            return Err(Error::MissingPrediction(id.clone()));
        }
    }
    if first.len() != gold.len() {
        if let Some(extra) = first.probs().keys().find(|id| gold.get(id).is_none()) {
            return Err(Error::UnknownId(extra.clone()));
        }
    }
    let ids: Vec<&String> = gold.entries().keys().collect();
    Ok(Aligned {
        gold: gold.entries().values().copied().collect(),
        members: members
            .iter()
            .map(|m| ids.iter().map(|id| m.probs()[*id]).collect())
            .collect(),
    })
}

fn score_weights(data: &Aligned, weights: &[f64], taus: &[f64]) -> Vec<SurfaceCell> {
    let n = data.gold.len();
    let mixed: Vec<f64> = (0..n)
        .map(|i| combine(data.members.iter().map(|m| m[i]), weights))
        .collect();
    taus.iter()
        .map(|&tau| {
            let counts = ConfusionCounts::tally(
                data.gold
                    .iter()
                    .zip(&mixed)
                    .map(|(&g, &p)| (g, label_at(p, tau))),
            );
            SurfaceCell {
                alpha: weights[0],
                tau,
                macro_f1: MetricReport::from_counts(counts).f1_macro,
            }
        })
        .collect()
}

/// Scores every (weight vector, tau) cell and returns the preferred one.
fn search(
    gold: &GoldLabels,
    members: &[&PredictionRun],
    weight_options: &[Vec<f64>],
    taus: &[f64],
    default_grid: bool,
    mode: ExecMode,
) -> Result<SearchResult> {
    check_axis("tau", taus)?;
    for w in weight_options {
        if w.len() != members.len() {
            return Err(Error::WeightError(format!(
                "{} members but {} weights",
                members.len(),
                w.len()
            )));
        }
        check_weights(w)?;
    }
    for &t in taus {
        check_threshold(t)?;
    }
    let data = align(gold, members)?;

    let rows = exec::map(mode, weight_options, |w| score_weights(&data, w, taus));

    let mut best: Option<(usize, usize, SurfaceCell)> = None;
    let mut surface = Vec::with_capacity(weight_options.len() * taus.len());
    for (wi, row) in rows.into_iter().enumerate() {
        for (ti, cell) in row.into_iter().enumerate() {
            let better = match &best {
                None => true,
                Some((_, _, b)) => preference(&cell, b) == Ordering::Greater,
            };
            if better {
                best = Some((wi, ti, cell));
            }
            surface.push(cell);
        }
    }
    let (wi, ti, _) = best.expect("non-empty grid");
    let weights = &weight_options[wi];
    let tau = taus[ti];

    let best_config = EnsembleConfig::new(
        members
            .iter()
            .zip(weights)
            .map(|(m, &weight)| MemberWeight {
                model_id: m.meta().model_id.clone(),
                weight,
            })
            .collect(),
        tau,
    )?;
    let best_dev_report = if members.len() == 1 {
        evaluate_run(gold, members[0], tau)?
    } else {
        evaluate_run(gold, &soft_vote(members, weights)?, tau)?
    };

    Ok(SearchResult {
        best_config,
        best_dev_report,
        full_surface: surface,
        default_grid,
    })
}

/// Picks the decision threshold for a single run.
pub fn tune_threshold(
    gold: &GoldLabels,
    run: &PredictionRun,
    taus: &[f64],
    mode: ExecMode,
) -> Result<SearchResult> {
    search(gold, &[run], &[vec![1.0]], taus, false, mode)
}

/// Searches `alpha * spec + (1 - alpha) * gen` over the full grid.
pub fn tune_pair(
    gold: &GoldLabels,
    spec: &PredictionRun,
    gen: &PredictionRun,
    grid: &SearchGrid,
    mode: ExecMode,
) -> Result<SearchResult> {
    grid.validate()?;
    let options: Vec<Vec<f64>> = grid
        .alpha_values
        .iter()
        .map(|&a| vec![a, 1.0 - a])
        .collect();
    let default_grid = *grid == SearchGrid::default();
    search(gold, &[spec, gen], &options, &grid.tau_values, default_grid, mode)
}

/// For three or more members: the uniform mean plus any caller-supplied
/// weight vectors, each crossed with `taus`.
pub fn tune_members(
    gold: &GoldLabels,
    members: &[&PredictionRun],
    extra_weights: &[Vec<f64>],
    taus: &[f64],
    mode: ExecMode,
) -> Result<SearchResult> {
    if members.is_empty() {
        return Err(Error::WeightError("ensemble has no members".into()));
    }
    let mut options = vec![uniform_weights(members.len())];
    options.extend(extra_weights.iter().cloned());
    search(gold, members, &options, taus, false, mode)
}
