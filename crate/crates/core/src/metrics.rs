//! Binary polarization metrics.
//!
//! "Polarized" is the positive class everywhere. A prediction is polarized
//! when its probability is at or above the threshold. Any class whose
//! precision and recall are both zero gets an F1 of 0, so macro F1 is always
//! defined.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neutral,
    Polarized,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Neutral),
            1 => Some(Label::Polarized),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Label::Neutral => 0,
            Label::Polarized => 1,
        }
    }

    pub fn is_polarized(self) -> bool {
        self == Label::Polarized
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neutral => Label::Polarized,
            Label::Polarized => Label::Neutral,
        }
    }
}

/// Hard predictions keyed by sample id.
pub type LabelMap = BTreeMap<String, Label>;

/// Reference labels for one track and split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabels {
    entries: LabelMap,
}

impl GoldLabels {
    pub fn new(entries: LabelMap) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("gold label set"));
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        let mut entries = LabelMap::new();
        for (id, label) in pairs {
            let id = id.into();
            if entries.insert(id.clone(), label).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate sample id `{id}`")));
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &LabelMap {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.entries.get(id).copied()
    }

    /// Fraction of samples labeled polarized.
    pub fn prevalence(&self) -> f64 {
        let pos = self.entries.values().filter(|l| l.is_polarized()).count();
        pos as f64 / self.entries.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected dev or test)")),
        }
    }
}

/// Which track, model and split a probability vector belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunMeta {
    pub track: String,
    pub model_id: String,
    pub split: Split,
}

impl RunMeta {
    pub fn new(track: impl Into<String>, model_id: impl Into<String>, split: Split) -> Self {
        Self {
            track: track.into(),
            model_id: model_id.into(),
            split,
        }
    }
}

/// Polarized-class probabilities of one model on one (track, split).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    meta: RunMeta,
    probs: BTreeMap<String, f64>,
}

impl PredictionRun {
    pub fn new(meta: RunMeta, probs: BTreeMap<String, f64>) -> Result<Self> {
        for (id, &p) in &probs {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::FractionOutOfRange {
                    field: format!("prob[{id}]"),
                    value: p,
                });
            }
        }
        Ok(Self { meta, probs })
    }

    pub fn from_pairs<I, S>(meta: RunMeta, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut probs = BTreeMap::new();
        for (id, p) in pairs {
            let id = id.into();
            if probs.insert(id.clone(), p).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate sample id `{id}`")));
            }
        }
        Self::new(meta, probs)
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.probs.get(id).copied()
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.meta.model_id = model_id.into();
        self
    }
}

pub(crate) fn check_threshold(tau: f64) -> Result<()> {
    if tau.is_finite() && (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(tau))
    }
}

#[inline]
pub(crate) fn label_at(prob: f64, tau: f64) -> Label {
    if prob >= tau {
        Label::Polarized
    } else {
        Label::Neutral
    }
}

/// Thresholds a run into hard labels; `prob == tau` is polarized.
pub fn binarize(run: &PredictionRun, tau: f64) -> Result<LabelMap> {
    check_threshold(tau)?;
    Ok(run
        .probs
        .iter()
        .map(|(id, &p)| (id.clone(), label_at(p, tau)))
        .collect())
}

/// Confusion counts with polarized as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    #[inline]
    pub fn record(&mut self, gold: Label, pred: Label) {
        match (gold, pred) {
            (Label::Polarized, Label::Polarized) => self.tp += 1,
            (Label::Neutral, Label::Polarized) => self.fp += 1,
            (Label::Polarized, Label::Neutral) => self.fn_ += 1,
            (Label::Neutral, Label::Neutral) => self.tn += 1,
        }
    }

    pub fn tally<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Label, Label)>,
    {
        let mut c = Self::default();
        for (g, p) in pairs {
            c.record(g, p);
        }
        c
    }

    /// Fraction of samples predicted polarized.
    pub fn positive_rate(&self) -> f64 {
        ratio(self.tp + self.fp, self.total())
    }
}

/// Counts `pred` against `gold`. Every gold id needs a prediction and no
/// prediction may refer to an id outside the gold set.
pub fn confusion(gold: &GoldLabels, pred: &LabelMap) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for (id, &g) in &gold.entries {
        let p = pred
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingPrediction(id.clone()))?;
        counts.record(g, p);
    }
    if pred.len() != gold.len() {
        if let Some(extra) = pred.keys().find(|id| !gold.entries.contains_key(*id)) {
            return Err(Error::UnknownId(extra.clone()));
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_binary: f64,
    pub precision_neg: f64,
    pub recall_neg: f64,
    pub f1_neg: f64,
    pub f1_macro: f64,
    pub counts: ConfusionCounts,
    pub n: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl MetricReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, fn_, tn } = counts;
        let n = counts.total();
        let precision_pos = ratio(tp, tp + fp);
        let recall_pos = ratio(tp, tp + fn_);
        let precision_neg = ratio(tn, tn + fn_);
        let recall_neg = ratio(tn, tn + fp);
        let f1_binary = harmonic(precision_pos, recall_pos);
        let f1_neg = harmonic(precision_neg, recall_neg);
        Self {
            accuracy: ratio(tp + tn, n),
            precision_pos,
            recall_pos,
            f1_binary,
            precision_neg,
            recall_neg,
            f1_neg,
            f1_macro: (f1_binary + f1_neg) / 2.0,
            counts,
            n,
        }
    }

    pub fn precision_macro(&self) -> f64 {
        (self.precision_pos + self.precision_neg) / 2.0
    }

    pub fn recall_macro(&self) -> f64 {
        (self.recall_pos + self.recall_neg) / 2.0
    }

    /// `|P_macro - R_macro|`; smaller is more balanced.
    pub fn balance_gap(&self) -> f64 {
        (self.precision_macro() - self.recall_macro()).abs()
    }
}

pub fn metric_report(gold: &GoldLabels, pred: &LabelMap) -> Result<MetricReport> {
    Ok(MetricReport::from_counts(confusion(gold, pred)?))
}

/// Thresholds `run` at `tau` and scores it.
pub fn evaluate_run(gold: &GoldLabels, run: &PredictionRun, tau: f64) -> Result<MetricReport> {
    metric_report(gold, &binarize(run, tau)?)
}
