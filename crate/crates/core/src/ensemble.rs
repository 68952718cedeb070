//! Weighted soft voting over member probability vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{check_threshold, PredictionRun};

/// Allowed distance of a weight vector's sum from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_TAU: f64 = 0.5;

fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberWeight {
    pub model_id: String,
    pub weight: f64,
}

/// Member weights plus decision threshold of a (possibly single-model)
/// system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: Vec<MemberWeight>,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl EnsembleConfig {
    pub fn new(members: Vec<MemberWeight>, tau: f64) -> Result<Self> {
        let cfg = Self { members, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn single(model_id: impl Into<String>, tau: f64) -> Result<Self> {
        Self::new(
            vec![MemberWeight {
                model_id: model_id.into(),
                weight: 1.0,
            }],
            tau,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::WeightError("ensemble has no members".into()));
        }
        check_weights(&self.weights())?;
        check_threshold(self.tau)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn is_uniform(&self) -> bool {
        let k = self.members.len() as f64;
        self.members
            .iter()
            .all(|m| (m.weight - 1.0 / k).abs() <= WEIGHT_SUM_TOLERANCE)
    }

    /// `A(0.65)+B(0.35)` style identifier.
    pub fn mixture_id(&self) -> String {
        mixture_id(
            self.members
                .iter()
                .map(|m| (m.model_id.as_str(), m.weight)),
        )
    }
}

pub fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::WeightError("no weights given".into()));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::WeightError(format!("weight #{i} is {w}")));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightError(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Two decimals unless that loses information, then up to four.
pub(crate) fn format_weight(w: f64) -> String {
    let two = format!("{w:.2}");
    if (two.parse::<f64>().unwrap_or(f64::NAN) - w).abs() < 1e-12 {
        return two;
    }
    let four = format!("{w:.4}");
    let trimmed = four.trim_end_matches('0');
    if trimmed.len() < 4 {
        two
    } else {
        trimmed.to_string()
    }
}

fn mixture_id<'a>(parts: impl Iterator<Item = (&'a str, f64)>) -> String {
    parts
        .map(|(id, w)| format!("{id}({})", format_weight(w)))
        .collect::<Vec<_>>()
        .join("+")
}

/// Checks that every member shares track, split and sample ids with the first.
pub(crate) fn check_compatible(members: &[&PredictionRun]) -> Result<()> {
    let Some(first) = members.first() else {
        return Err(Error::WeightError("ensemble has no members".into()));
    };
    let head = first.meta();
    for m in &members[1..] {
        let meta = m.meta();
        if meta.track != head.track {
            return Err(Error::MemberMismatch {
                model_id: meta.model_id.clone(),
                expected: format!("track {}", head.track),
                found: format!("track {}", meta.track),
            });
        }
        if meta.split != head.split {
            return Err(Error::MemberMismatch {
                model_id: meta.model_id.clone(),
                expected: format!("split {}", head.split),
                found: format!("split {}", meta.split),
            });
        }
        if m.len() != first.len() || !m.probs().keys().eq(first.probs().keys()) {
            let detail = first
                .probs()
                .keys()
                .find(|id| m.get(id).is_none())
                .map(|id| format!("missing id `{id}`"))
                .or_else(|| {
                    m.probs()
                        .keys()
                        .find(|id| first.get(id).is_none())
                        .map(|id| format!("extra id `{id}`"))
                })
                .unwrap_or_else(|| "id sets differ".into());
            return Err(Error::IdMismatch {
                reference: head.model_id.clone(),
                model_id: meta.model_id.clone(),
                detail,
            });
        }
    }
    Ok(())
}

/// Weighted sum of one sample's member probabilities, accumulated in member
/// order and clamped to the members' range.
#[inline]
pub(crate) fn combine(probs: impl Iterator<Item = f64>, weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, &w) in probs.zip(weights) {
        acc += w * p;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    acc.clamp(lo, hi)
}

/// Per-sample `sum_i weight_i * prob_i`.
pub fn soft_vote(members: &[&PredictionRun], weights: &[f64]) -> Result<PredictionRun> {
    if members.len() != weights.len() {
        return Err(Error::WeightError(format!(
            "{} members but {} weights",
            members.len(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    check_compatible(members)?;

    let first = members[0];
    let probs: BTreeMap<String, f64> = first
        .probs()
        .keys()
        .map(|id| {
            let p = combine(members.iter().map(|m| m.probs()[id]), weights);
            (id.clone(), p)
        })
        .collect();
    let model_id = mixture_id(
        members
            .iter()
            .map(|m| m.meta().model_id.as_str())
            .zip(weights.iter().copied()),
    );
    let mut meta = first.meta().clone();
    meta.model_id = model_id;
    PredictionRun::new(meta, probs)
}

/// Unweighted mean of the members.
pub fn uniform_vote(members: &[&PredictionRun]) -> Result<PredictionRun> {
    if members.is_empty() {
        return Err(Error::WeightError("ensemble has no members".into()));
    }
    soft_vote(members, &uniform_weights(members.len()))
}

pub fn uniform_weights(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}
