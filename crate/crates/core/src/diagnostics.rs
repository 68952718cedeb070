//! Prediction skew, majority-class collapse and dev/test shift grouping.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{confusion, ConfusionCounts, GoldLabels, LabelMap};
use crate::BOUNDARY_TOLERANCE;

/// When a run counts as collapsed onto the polarized class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseRule {
    /// Positive-prediction rate at or above which collapse is possible.
    pub min_positive_rate: f64,
    /// Neutral recall strictly below which collapse is declared.
    pub max_neutral_recall: f64,
}

impl Default for CollapseRule {
    fn default() -> Self {
        Self {
            min_positive_rate: 0.90,
            max_neutral_recall: 0.50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub positive_rate: f64,
    pub neutral_recall: f64,
    pub collapsed: bool,
}

impl SkewReport {
    pub fn from_counts(counts: &ConfusionCounts, rule: &CollapseRule) -> Self {
        let negatives = counts.tn + counts.fp;
        let neutral_recall = if negatives == 0 {
            0.0
        } else {
            counts.tn as f64 / negatives as f64
        };
        Self::from_rates(counts.positive_rate(), neutral_recall, rule)
    }

    pub fn from_rates(positive_rate: f64, neutral_recall: f64, rule: &CollapseRule) -> Self {
        Self {
            positive_rate,
            neutral_recall,
            collapsed: positive_rate >= rule.min_positive_rate
                && neutral_recall < rule.max_neutral_recall,
        }
    }
}

pub fn prediction_skew(
    pred: &LabelMap,
    gold: &GoldLabels,
    rule: &CollapseRule,
) -> Result<SkewReport> {
    Ok(SkewReport::from_counts(&confusion(gold, pred)?, rule))
}

/// Macro F1 of the all-polarized predictor, `p / (1 + p)`.
pub fn majority_baseline(prevalence: f64) -> Result<f64> {
    if !prevalence.is_finite() || !(0.0..=1.0).contains(&prevalence) {
        return Err(Error::FractionOutOfRange {
            field: "prevalence".into(),
            value: prevalence,
        });
    }
    if prevalence == 0.0 {
        return Err(Error::DegenerateGold);
    }
    // positive F1 = 2p / (1 + p), negative F1 = 0
    Ok(prevalence / (1.0 + prevalence))
}

/// `test - dev`.
pub fn dev_test_shift(dev_f1: f64, test_f1: f64) -> f64 {
    test_f1 - dev_f1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftGroup {
    AnomalousGain,
    Gain,
    Stable,
    Loss,
}

impl ShiftGroup {
    pub const ALL: [ShiftGroup; 4] = [
        ShiftGroup::AnomalousGain,
        ShiftGroup::Gain,
        ShiftGroup::Stable,
        ShiftGroup::Loss,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            ShiftGroup::AnomalousGain => "Special Case: Anomalous Gain",
            ShiftGroup::Gain => "Group 1: Top Gains",
            ShiftGroup::Stable => "Group 2: Stable Performers",
            ShiftGroup::Loss => "Group 3: Top Losses",
        }
    }
}

impl fmt::Display for ShiftGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftGroup::AnomalousGain => "anomalous_gain",
            ShiftGroup::Gain => "gain",
            ShiftGroup::Stable => "stable",
            ShiftGroup::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub track: String,
    pub dev_f1: f64,
    pub test_f1: f64,
    pub delta: f64,
    pub group: ShiftGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<SkewReport>,
}

impl ShiftRecord {
    /// Builds and classifies a record with the default ±0.02 band.
    pub fn new(
        track: impl Into<String>,
        dev_f1: f64,
        test_f1: f64,
        skew: Option<SkewReport>,
    ) -> Self {
        Self::with_band(track, dev_f1, test_f1, skew, DEFAULT_STABILITY_BAND)
    }

    pub fn with_band(
        track: impl Into<String>,
        dev_f1: f64,
        test_f1: f64,
        skew: Option<SkewReport>,
        band: f64,
    ) -> Self {
        let delta = dev_test_shift(dev_f1, test_f1);
        Self {
            track: track.into(),
            dev_f1,
            test_f1,
            delta,
            group: classify_shift(delta, skew.as_ref(), band),
            skew,
        }
    }
}

pub const DEFAULT_STABILITY_BAND: f64 = 0.02;

/// Stable when `|delta| <= band` (inclusive); a gain on a collapsed run is
/// reported as an anomalous gain.
pub fn classify_shift(delta: f64, skew: Option<&SkewReport>, band: f64) -> ShiftGroup {
    if delta.abs() <= band + BOUNDARY_TOLERANCE {
        ShiftGroup::Stable
    } else if delta > 0.0 {
        if skew.is_some_and(|s| s.collapsed) {
            ShiftGroup::AnomalousGain
        } else {
            ShiftGroup::Gain
        }
    } else {
        ShiftGroup::Loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Label;

    fn rule() -> CollapseRule {
        CollapseRule::default()
    }

    #[test]
    fn all_polarized_collapses() {
        let gold = GoldLabels::from_pairs([
            ("a", Label::Polarized),
            ("b", Label::Neutral),
            ("c", Label::Polarized),
        ])
        .unwrap();
        let pred: LabelMap = ["a", "b", "c"]
            .iter()
            .map(|id| (id.to_string(), Label::Polarized))
            .collect();
        let s = prediction_skew(&pred, &gold, &rule()).unwrap();
        assert_eq!(s.positive_rate, 1.0);
        assert_eq!(s.neutral_recall, 0.0);
        assert!(s.collapsed);
    }

    #[test]
    fn khmer_like_counts_collapse() {
        // 1000 samples, 908 polarized, 956 predicted polarized
        let c = ConfusionCounts {
            tp: 896,
            fp: 60,
            fn_: 12,
            tn: 32,
        };
        let s = SkewReport::from_counts(&c, &rule());
        assert!((s.positive_rate - 0.956).abs() < 1e-12);
        assert!(s.neutral_recall > 0.3 && s.neutral_recall < 0.4);
        assert!(s.collapsed);

        let near_zero = ConfusionCounts {
            tp: 906,
            fp: 90,
            fn_: 2,
            tn: 2,
        };
        assert!(SkewReport::from_counts(&near_zero, &rule()).collapsed);
    }

    #[test]
    fn balanced_run_not_collapsed() {
        let s = SkewReport::from_rates(0.5, 0.8, &rule());
        assert!(!s.collapsed);
        for rate in [0.41, 0.56] {
            assert!(!SkewReport::from_rates(rate, 0.0, &rule()).collapsed);
        }
    }

    #[test]
    fn majority_baseline_values() {
        assert!((majority_baseline(0.908).unwrap() - 0.4759).abs() < 1e-4);
        assert_eq!(majority_baseline(1.0).unwrap(), 0.5);
        assert!((majority_baseline(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(majority_baseline(0.0), Err(Error::DegenerateGold)));
        assert!(majority_baseline(1.5).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(crate::selection::format_pp(dev_test_shift(0.856, 0.889), 1), "+3.3%");
        assert_eq!(crate::selection::format_pp(dev_test_shift(0.888, 0.803), 1), "-8.5%");
        assert_eq!(dev_test_shift(0.7, 0.7), 0.0);
    }

    #[test]
    fn classification() {
        let collapsed = SkewReport::from_rates(0.956, 0.1, &rule());
        let b = DEFAULT_STABILITY_BAND;
        assert_eq!(
            classify_shift(dev_test_shift(0.670, 0.711), Some(&collapsed), b),
            ShiftGroup::AnomalousGain
        );
        assert_eq!(
            classify_shift(dev_test_shift(0.670, 0.711), None, b),
            ShiftGroup::Gain
        );
        assert_eq!(
            classify_shift(dev_test_shift(0.911, 0.891), None, b),
            ShiftGroup::Stable
        );
        assert_eq!(
            classify_shift(dev_test_shift(0.830, 0.768), None, b),
            ShiftGroup::Loss
        );
        // a collapsed run that loses is still a loss
        assert_eq!(classify_shift(-0.05, Some(&collapsed), b), ShiftGroup::Loss);
    }
}
