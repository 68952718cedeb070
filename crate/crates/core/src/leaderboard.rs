//! Leaderboard gap analysis, translation-ablation comparison and the
//! organizer-vs-in-house baseline context.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{round_to, BOUNDARY_TOLERANCE};

pub const DEFAULT_WINDOW_FLOOR: f64 = -0.04;
pub const DEFAULT_CHALLENGE_CUTOFF: f64 = -0.05;

/// `our - sota`, rounded to four decimals.
pub fn delta_sota(our: f64, sota: f64) -> f64 {
    round_to(our - sota, 4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub track: String,
    pub our_score: f64,
    pub sota_score: f64,
    /// Snapshot rank; carried for display only.
    pub rank: Option<u32>,
    pub delta_sota: f64,
}

impl LeaderboardEntry {
    pub fn new(track: impl Into<String>, our_score: f64, sota_score: f64, rank: Option<u32>) -> Self {
        Self {
            track: track.into(),
            our_score,
            sota_score,
            rank,
            delta_sota: delta_sota(our_score, sota_score),
        }
    }
}

fn by_delta_desc(a: &LeaderboardEntry, b: &LeaderboardEntry) -> std::cmp::Ordering {
    b.delta_sota
        .total_cmp(&a.delta_sota)
        .then_with(|| a.track.cmp(&b.track))
}

/// Entries with `delta_sota >= floor`, best first.
pub fn proximity_window(entries: &[LeaderboardEntry], floor: f64) -> Vec<LeaderboardEntry> {
    let mut out: Vec<_> = entries
        .iter()
        .filter(|e| e.delta_sota >= floor - BOUNDARY_TOLERANCE)
        .cloned()
        .collect();
    out.sort_by(by_delta_desc);
    out
}

/// Entries with `delta_sota < cutoff`, worst first.
pub fn challenge_tracks(entries: &[LeaderboardEntry], cutoff: f64) -> Vec<LeaderboardEntry> {
    let mut out: Vec<_> = entries
        .iter()
        .filter(|e| e.delta_sota < cutoff - BOUNDARY_TOLERANCE)
        .cloned()
        .collect();
    out.sort_by(|a, b| by_delta_desc(b, a));
    out
}

/// Entries in neither the window nor the challenge set.
pub fn mid_band(entries: &[LeaderboardEntry], floor: f64, cutoff: f64) -> Vec<LeaderboardEntry> {
    let inside: BTreeSet<String> = proximity_window(entries, floor)
        .into_iter()
        .chain(challenge_tracks(entries, cutoff))
        .map(|e| e.track)
        .collect();
    let mut out: Vec<_> = entries
        .iter()
        .filter(|e| !inside.contains(&e.track))
        .cloned()
        .collect();
    out.sort_by(by_delta_desc);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationInput {
    pub track: String,
    #[serde(default)]
    pub augmented_model: Option<String>,
    pub baseline_f1: f64,
    pub augmented_f1: f64,
    pub final_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationWinner {
    Augmented,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    #[serde(flatten)]
    pub input: AblationInput,
    /// Augmented variant against the final system; ties go to final.
    pub winner: AblationWinner,
    /// Augmentation scored below the unaugmented baseline.
    pub degraded: bool,
    pub final_below_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub final_wins: usize,
    pub augmented_wins: usize,
    pub degradations: Vec<String>,
}

pub fn ablation_report(inputs: &[AblationInput]) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        for (field, v) in [
            ("baseline_f1", input.baseline_f1),
            ("augmented_f1", input.augmented_f1),
            ("final_f1", input.final_f1),
        ] {
            check_fraction(&format!("{}.{field}", input.track), v)?;
        }
        let winner = if input.augmented_f1 > input.final_f1 {
            AblationWinner::Augmented
        } else {
            AblationWinner::Final
        };
        rows.push(AblationRow {
            winner,
            degraded: input.augmented_f1 < input.baseline_f1,
            final_below_baseline: input.final_f1 < input.baseline_f1,
            input: input.clone(),
        });
    }
    Ok(AblationReport {
        final_wins: rows
            .iter()
            .filter(|r| r.winner == AblationWinner::Final)
            .count(),
        augmented_wins: rows
            .iter()
            .filter(|r| r.winner == AblationWinner::Augmented)
            .count(),
        degradations: rows
            .iter()
            .filter(|r| r.degraded)
            .map(|r| r.input.track.clone())
            .collect(),
        rows,
    })
}

fn check_fraction(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::FractionOutOfRange {
            field: field.to_string(),
            value: v,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrongerBaseline {
    Organizer,
    Inhouse,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRow {
    pub track: String,
    pub organizer: f64,
    pub inhouse: f64,
    /// `organizer - inhouse`.
    pub difference: f64,
    pub stronger: StrongerBaseline,
}

/// Per-track comparison of two baselines; both maps must cover the same tracks.
pub fn baseline_context(
    organizer: &BTreeMap<String, f64>,
    inhouse: &BTreeMap<String, f64>,
) -> Result<Vec<ContextRow>> {
    if let Some(t) = organizer.keys().find(|t| !inhouse.contains_key(*t)) {
        return Err(Error::TrackMismatch(format!("`{t}` has no in-house score")));
    }
    if let Some(t) = inhouse.keys().find(|t| !organizer.contains_key(*t)) {
        return Err(Error::TrackMismatch(format!("`{t}` has no organizer score")));
    }
    organizer
        .iter()
        .map(|(track, &org)| {
            let own = inhouse[track];
            check_fraction(&format!("{track}.organizer"), org)?;
            check_fraction(&format!("{track}.inhouse"), own)?;
            let difference = round_to(org - own, 6);
            let stronger = if difference > 0.0 {
                StrongerBaseline::Organizer
            } else if difference < 0.0 {
                StrongerBaseline::Inhouse
            } else {
                StrongerBaseline::Tie
            };
            Ok(ContextRow {
                track: track.clone(),
                organizer: org,
                inhouse: own,
                difference,
                stronger,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert_eq!(format!("{:.4}", delta_sota(0.8308, 0.8348)), "-0.0040");
        assert_eq!(format!("{:.4}", delta_sota(0.6149, 0.7303)), "-0.1154");
        assert_eq!(delta_sota(0.7, 0.7), 0.0);
        assert_eq!(format!("{:.4}", delta_sota(0.7, 0.7)), "0.0000");
    }

    #[test]
    fn delta_is_antisymmetric() {
        for (a, b) in [(0.8308, 0.8348), (0.1, 0.95), (0.61, 0.6)] {
            assert_eq!(delta_sota(a, b), -delta_sota(b, a));
        }
    }

    #[test]
    fn window_and_cutoff_boundaries() {
        let entries = vec![
            LeaderboardEntry::new("spa", 0.7632, 0.8030, Some(22)),
            LeaderboardEntry::new("deu", 0.7096, 0.7608, None),
            LeaderboardEntry::new("edge", 0.70, 0.74, None),
            LeaderboardEntry::new("cut", 0.70, 0.75, None),
        ];
        let w: Vec<_> = proximity_window(&entries, DEFAULT_WINDOW_FLOOR)
            .into_iter()
            .map(|e| e.track)
            .collect();
        assert_eq!(w, ["spa", "edge"]);
        let c: Vec<_> = challenge_tracks(&entries, DEFAULT_CHALLENGE_CUTOFF)
            .into_iter()
            .map(|e| e.track)
            .collect();
        assert_eq!(c, ["deu"]);
        let m: Vec<_> = mid_band(&entries, DEFAULT_WINDOW_FLOOR, DEFAULT_CHALLENGE_CUTOFF)
            .into_iter()
            .map(|e| e.track)
            .collect();
        assert_eq!(m, ["cut"]);
        assert!(proximity_window(&[], DEFAULT_WINDOW_FLOOR).is_empty());
    }

    #[test]
    fn ablation_rows() {
        let rep = ablation_report(&[
            AblationInput {
                track: "rus".into(),
                augmented_model: None,
                baseline_f1: 0.743,
                augmented_f1: 0.684,
                final_f1: 0.784,
            },
            AblationInput {
                track: "swa".into(),
                augmented_model: None,
                baseline_f1: 0.779,
                augmented_f1: 0.791,
                final_f1: 0.782,
            },
            AblationInput {
                track: "eq".into(),
                augmented_model: None,
                baseline_f1: 0.7,
                augmented_f1: 0.7,
                final_f1: 0.7,
            },
        ])
        .unwrap();
        assert_eq!(rep.rows[0].winner, AblationWinner::Final);
        assert!(rep.rows[0].degraded);
        assert_eq!(rep.rows[1].winner, AblationWinner::Augmented);
        assert!(!rep.rows[1].degraded);
        assert_eq!(rep.rows[2].winner, AblationWinner::Final);
        assert!(!rep.rows[2].degraded);
        assert_eq!((rep.final_wins, rep.augmented_wins), (2, 1));
        assert_eq!(rep.degradations, ["rus"]);
    }

    #[test]
    fn context_rows() {
        let org = BTreeMap::from([("khm".to_string(), 0.737), ("ita".to_string(), 0.564)]);
        let own = BTreeMap::from([("khm".to_string(), 0.588), ("ita".to_string(), 0.646)]);
        let rows = baseline_context(&org, &own).unwrap();
        let ita = &rows[0];
        assert_eq!(ita.stronger, StrongerBaseline::Inhouse);
        assert!((ita.difference + 0.082).abs() < 1e-9);
        let khm = &rows[1];
        assert_eq!(khm.stronger, StrongerBaseline::Organizer);
        assert!((khm.difference - 0.149).abs() < 1e-9);

        let same = baseline_context(&org, &org).unwrap();
        assert!(same.iter().all(|r| r.difference == 0.0 && r.stronger == StrongerBaseline::Tie));

        let partial = BTreeMap::from([("khm".to_string(), 0.5)]);
        assert!(matches!(baseline_context(&org, &partial), Err(Error::TrackMismatch(_))));
    }
}
