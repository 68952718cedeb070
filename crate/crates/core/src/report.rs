//! Markdown tables, plus regeneration of the standard reports from a
//! ledger and registry. Output is a pure function of the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diagnostics::{CollapseRule, ShiftGroup, ShiftRecord, SkewReport};
use crate::ensemble::EnsembleConfig;
use crate::error::Result;
use crate::fragmentation::FragmentationRow;
use crate::io::{Registry, RunRecord};
use crate::leaderboard::{AblationReport, AblationWinner, ContextRow, LeaderboardEntry};
use crate::metrics::{MetricReport, Split};
use crate::selection::{
    decide_among, format_pp, CandidateEvaluation, ReplayRow, Role, Rule, SelectionDecision,
    SelectionPolicy,
};

const LANGUAGES: &[(&str, &str)] = &[
    ("amh", "Amharic"),
    ("arb", "Arabic"),
    ("ben", "Bengali"),
    ("deu", "German"),
    ("eng", "English"),
    ("fas", "Persian"),
    ("hau", "Hausa"),
    ("hin", "Hindi"),
    ("ita", "Italian"),
    ("khm", "Khmer"),
    ("mya", "Burmese"),
    ("nep", "Nepali"),
    ("ori", "Odia"),
    ("pan", "Punjabi"),
    ("pol", "Polish"),
    ("rus", "Russian"),
    ("spa", "Spanish"),
    ("swa", "Swahili"),
    ("tel", "Telugu"),
    ("tur", "Turkish"),
    ("urd", "Urdu"),
    ("zho", "Chinese"),
];

pub fn language_name(code: &str) -> Option<&'static str> {
    LANGUAGES
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, name)| *name)
}

/// `Persian (fas)` when the code is known, else the code itself.
pub fn language_label(code: &str) -> String {
    match language_name(code) {
        Some(name) => format!("{name} ({code})"),
        None => code.to_string(),
    }
}

fn header(out: &mut String, cols: &[&str], align: &[&str]) {
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}|", align.join("|"));
}

fn section(out: &mut String, title: &str, width: usize) {
    let mut cells = vec![String::new(); width];
    cells[0] = format!("*{title}*");
    let _ = writeln!(out, "| {} |", cells.join(" | "));
}

/// Acc / F1(B) / F1(M) per track.
pub fn metrics_table(rows: &[(String, MetricReport)]) -> String {
    let mut out = String::new();
    header(&mut out, &["Lang", "Acc", "F1(B)", "F1(M)"], &["---", "---:", "---:", "---:"]);
    for (track, r) in rows {
        let _ = writeln!(
            out,
            "| {track} | {:.3} | {:.3} | {:.3} |",
            r.accuracy, r.f1_binary, r.f1_macro
        );
    }
    out
}

/// The "Weights & τ" cell: `65/35, τ=0.45`, `Average`, `τ=0.35` or `-`.
pub fn weights_cell(cfg: &EnsembleConfig) -> String {
    let default_tau = (cfg.tau - crate::ensemble::DEFAULT_TAU).abs() < 1e-12;
    let tau = format!("τ={:.2}", cfg.tau);
    let weights = match cfg.members.len() {
        1 => None,
        2 => Some(
            cfg.members
                .iter()
                .map(|m| format!("{}", (m.weight * 100.0).round() as i64))
                .collect::<Vec<_>>()
                .join("/"),
        ),
        _ if cfg.is_uniform() => Some("Average".to_string()),
        _ => Some(
            cfg.members
                .iter()
                .map(|m| crate::ensemble::format_weight(m.weight))
                .collect::<Vec<_>>()
                .join("/"),
        ),
    };
    match (weights, default_tau) {
        (None, true) => "-".into(),
        (None, false) => tau,
        (Some(w), true) => w,
        (Some(w), false) => format!("{w}, {tau}"),
    }
}

fn strategy_label(role: Role) -> &'static str {
    match role {
        Role::Baseline => "Baseline",
        Role::Specialist => "Specialist",
        Role::Generalist => "Generalist",
        Role::Ensemble => "Ensemble",
    }
}

/// Final system configuration per track, grouped by strategy.
pub fn registry_table(reg: &Registry) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Lang", "Code", "Strategy", "Model Details", "Weights & τ"],
        &["---", "---", "---", "---", "---"],
    );
    for role in [Role::Generalist, Role::Specialist, Role::Ensemble, Role::Baseline] {
        let mut tracks: Vec<_> = reg.tracks.iter().filter(|t| t.strategy == role).collect();
        tracks.sort_by(|a, b| {
            let na = a.language.as_deref().or(language_name(&a.code)).unwrap_or(&a.code);
            let nb = b.language.as_deref().or(language_name(&b.code)).unwrap_or(&b.code);
            na.cmp(nb)
        });
        for t in tracks {
            let name = t
                .language
                .as_deref()
                .or(language_name(&t.code))
                .unwrap_or(&t.code);
            let details = t.model_details.clone().unwrap_or_else(|| {
                t.final_config
                    .as_ref()
                    .map(|c| {
                        c.members
                            .iter()
                            .map(|m| m.model_id.as_str())
                            .collect::<Vec<_>>()
                            .join(" + ")
                    })
                    .unwrap_or_else(|| "-".into())
            });
            let weights = t
                .final_config
                .as_ref()
                .map(weights_cell)
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {details} | {weights} |",
                t.code,
                strategy_label(t.strategy)
            );
        }
    }
    out
}

fn transition_heading(role: Option<Role>) -> &'static str {
    match role {
        Some(Role::Specialist) => "Baseline → Monolingual Specialist",
        Some(Role::Generalist) => "Baseline → High-Capacity Generalist",
        Some(Role::Ensemble) => "Baseline → Hybrid Ensemble",
        Some(Role::Baseline) | None => "Other",
    }
}

/// Baseline vs adopted dev macro F1, in transition sections.
pub fn replay_table(rows: &[ReplayRow]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Lang", "Selected Architecture", "Baseline", "Selected", "ΔDev"],
        &["---", "---", "---:", "---:", "---:"],
    );
    for role in [
        Some(Role::Specialist),
        Some(Role::Generalist),
        Some(Role::Ensemble),
        None,
    ] {
        let group: Vec<_> = rows
            .iter()
            .filter(|r| match role {
                None => matches!(r.transition, None | Some(Role::Baseline)),
                Some(_) => r.transition == role,
            })
            .collect();
        if group.is_empty() {
            continue;
        }
        section(&mut out, transition_heading(role), 5);
        for r in group {
            let flag = if r.satisfies_rule { "" } else { " (rule violated)" };
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {}{flag} |",
                language_name(&r.track).unwrap_or(&r.track),
                r.architecture.as_deref().unwrap_or("-"),
                r.baseline_score,
                r.chosen_score,
                format_pp(r.delta_dev, 2)
            );
        }
    }
    out
}

fn rule_label(rule: Rule) -> &'static str {
    match rule {
        Rule::DeltaGain => "delta_gain",
        Rule::Balance => "balance (reconstructed clause)",
        Rule::BaselineRetained => "baseline_retained",
    }
}

pub fn decisions_table(decisions: &[SelectionDecision]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Track", "Chosen", "Role", "Rule", "ΔDev", "|P−R| baseline", "|P−R| chosen"],
        &["---", "---", "---", "---", "---:", "---:", "---:"],
    );
    for d in decisions {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.4} | {:.4} |",
            d.track,
            d.chosen,
            d.chosen_role,
            rule_label(d.rule_fired),
            format_pp(d.delta_dev, 2),
            d.balance_gap_baseline,
            d.balance_gap_chosen
        );
    }
    out
}

/// Dev vs test macro F1, in group sections, largest delta first.
pub fn shift_table(records: &[ShiftRecord]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Language", "Dev F1", "Test F1", "Δ"],
        &["---", "---:", "---:", "---:"],
    );
    for group in ShiftGroup::ALL {
        let mut rows: Vec<_> = records.iter().filter(|r| r.group == group).collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| b.delta.total_cmp(&a.delta).then_with(|| a.track.cmp(&b.track)));
        section(&mut out, group.heading(), 4);
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {} |",
                language_label(&r.track),
                r.dev_f1,
                r.test_f1,
                format_pp(r.delta, 1)
            );
        }
    }
    out
}

/// Tracks near the leaderboard best, with rank.
pub fn window_table(entries: &[LeaderboardEntry]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Language", "Rank", "Our Score", "SOTA", "ΔSOTA"],
        &["---", ":---:", ":---:", ":---:", ":---:"],
    );
    for e in entries {
        let rank = e.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "| {} | {rank} | {:.4} | {:.4} | {:.4} |",
            language_label(&e.track),
            e.our_score,
            e.sota_score,
            e.delta_sota
        );
    }
    out
}

/// Tracks far below the leaderboard best.
pub fn challenge_table(entries: &[LeaderboardEntry]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Language", "Macro F1", "SOTA", "ΔSOTA"],
        &["---", ":---:", ":---:", ":---:"],
    );
    for e in entries {
        let _ = writeln!(
            out,
            "| {} | {:.4} | {:.4} | {:.4} |",
            language_label(&e.track),
            e.our_score,
            e.sota_score,
            e.delta_sota
        );
    }
    out
}

pub fn ablation_table(report: &AblationReport) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Lang", "Aug. Model", "Baseline", "Augmented", "Final"],
        &["---", "---", ":---:", ":---:", ":---:"],
    );
    for r in &report.rows {
        let i = &r.input;
        let (aug, fin) = match r.winner {
            AblationWinner::Augmented => (
                format!("**{:.3}**", i.augmented_f1),
                format!("{:.3}", i.final_f1),
            ),
            AblationWinner::Final => (
                format!("{:.3}", i.augmented_f1),
                format!("**{:.3}**", i.final_f1),
            ),
        };
        let aug = if r.degraded { format!("{aug} ↓") } else { aug };
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {aug} | {fin} |",
            language_name(&i.track).unwrap_or(&i.track),
            i.augmented_model.as_deref().unwrap_or("-"),
            i.baseline_f1
        );
    }
    let _ = writeln!(
        out,
        "\nFinal wins {} of {}; augmented wins {}. Degraded by augmentation: {}.",
        report.final_wins,
        report.rows.len(),
        report.augmented_wins,
        if report.degradations.is_empty() {
            "none".to_string()
        } else {
            report.degradations.join(", ")
        }
    );
    out
}

pub fn context_table(rows: &[ContextRow]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Language", "Organizer Baseline", "In-house Baseline", "Difference"],
        &["---", ":---:", ":---:", ":---:"],
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:+.3} |",
            language_label(&r.track),
            r.organizer,
            r.inhouse,
            r.difference
        );
    }
    out
}

pub fn fragmentation_table(rows: &[FragmentationRow]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["Lang", "Generalist", "Specialist", "Reduction"],
        &["---", "---", "---", "---:"],
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {:.2} ({}) | {:.2} ({}) | {:.1}% |",
            language_name(&r.language).unwrap_or(&r.language),
            r.base_ratio,
            r.base_tokenizer,
            r.spec_ratio,
            r.spec_tokenizer,
            r.reduction_pct
        );
    }
    out
}

/// Settings used when regenerating reports from a ledger.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportSettings {
    pub policy: SelectionPolicy,
    pub collapse: CollapseRule,
    pub stability_band: Option<f64>,
}

/// Regenerates the standard Markdown reports from a ledger and registry.
///
/// - `system.md`: final configuration per track
/// - `results.md`: latest test record per track
/// - `selection.md`: selection decision from the latest dev record of every
///   registered candidate (tracks without a baseline record are listed as
///   skipped)
/// - `shift.md`: best dev macro F1 against the latest test record, with skew
///   taken from the test record's confusion counts
pub fn regenerate(
    records: &[RunRecord],
    registry: &Registry,
    settings: &ReportSettings,
) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    files.insert("system.md".to_string(), registry_table(registry));

    let mut latest_test: BTreeMap<&str, &RunRecord> = BTreeMap::new();
    let mut best_dev: BTreeMap<&str, f64> = BTreeMap::new();
    let mut latest_dev: BTreeMap<(&str, &str), &RunRecord> = BTreeMap::new();
    for r in records {
        match r.split {
            Split::Test => {
                latest_test.insert(&r.track, r);
            }
            Split::Dev => {
                let best = best_dev.entry(&r.track).or_insert(f64::NEG_INFINITY);
                *best = best.max(r.metrics.f1_macro);
                latest_dev.insert((&r.track, &r.model_id), r);
            }
        }
    }

    let results: Vec<(String, MetricReport)> = latest_test
        .iter()
        .map(|(t, r)| (t.to_string(), r.metrics))
        .collect();
    files.insert("results.md".to_string(), metrics_table(&results));

    let mut decisions = Vec::new();
    let mut skipped = Vec::new();
    for track in &registry.tracks {
        let mut evals: Vec<CandidateEvaluation> = track
            .candidates
            .iter()
            .filter_map(|c| {
                latest_dev
                    .get(&(track.code.as_str(), c.model_id.as_str()))
                    .map(|r| CandidateEvaluation {
                        model_id: c.model_id.clone(),
                        role: c.role,
                        dev_report: r.metrics,
                    })
            })
            .collect();
        if let Some(cfg) = &track.final_config {
            let id = if cfg.members.len() == 1 {
                cfg.members[0].model_id.clone()
            } else {
                cfg.mixture_id()
            };
            if !evals.iter().any(|e| e.model_id == id) {
                if let Some(r) = latest_dev.get(&(track.code.as_str(), id.as_str())) {
                    evals.push(CandidateEvaluation {
                        model_id: id.clone(),
                        role: track.strategy,
                        dev_report: r.metrics,
                    });
                }
            }
        }
        if evals.iter().any(|e| e.role == Role::Baseline) {
            decisions.push(decide_among(&track.code, &evals, &settings.policy)?);
        } else {
            skipped.push(track.code.clone());
        }
    }
    let mut selection = decisions_table(&decisions);
    if !skipped.is_empty() {
        let _ = writeln!(
            selection,
            "\nSkipped (no baseline dev record): {}.",
            skipped.join(", ")
        );
    }
    files.insert("selection.md".to_string(), selection);

    let band = settings
        .stability_band
        .unwrap_or(crate::diagnostics::DEFAULT_STABILITY_BAND);
    let shifts: Vec<ShiftRecord> = latest_test
        .iter()
        .filter_map(|(t, test)| {
            best_dev.get(t).map(|&dev| {
                let skew = SkewReport::from_counts(&test.metrics.counts, &settings.collapse);
                ShiftRecord::with_band(*t, dev, test.metrics.f1_macro, Some(skew), band)
            })
        })
        .collect();
    files.insert("shift.md".to_string(), shift_table(&shifts));
    Ok(files)
}
