mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::{ids, run_from};
use trackselect_core::diagnostics::{
    classify_shift, majority_baseline, prediction_skew, CollapseRule, ShiftGroup, SkewReport,
};
use trackselect_core::ensemble::{soft_vote, uniform_vote};
use trackselect_core::fragmentation::{
    fragmentation_ratio, reduction_raw, tokenize_word, GreedyTokenizer, SubwordVocabulary,
};
use trackselect_core::io::{emit_gold, emit_predictions, read_gold, read_predictions, Ledger, RunRecord};
use trackselect_core::leaderboard::{
    challenge_tracks, delta_sota, mid_band, proximity_window, LeaderboardEntry,
};
use trackselect_core::metrics::{
    confusion, metric_report, GoldLabels, Label, LabelMap, MetricReport, RunMeta, Split,
};
use trackselect_core::selection::{
    decide, CandidateEvaluation, Role, Rule, SelectionPolicy,
};
use trackselect_core::ExecMode;

fn labels(bits: &[bool]) -> LabelMap {
    ids(bits.len())
        .into_iter()
        .zip(bits.iter().map(|&b| if b { Label::Polarized } else { Label::Neutral }))
        .collect()
}

fn gold_of(bits: &[bool]) -> GoldLabels {
    GoldLabels::new(labels(bits)).unwrap()
}

fn flip(map: &LabelMap) -> LabelMap {
    map.iter().map(|(k, v)| (k.clone(), v.flipped())).collect()
}

fn paired_bits() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![(0u32..=20).prop_map(|i| i as f64 / 20.0), 0.0f64..=1.0],
        n,
    )
}

proptest! {
    #[test]
    fn macro_f1_symmetric_under_class_swap((g, p) in paired_bits()) {
        let gold = gold_of(&g);
        let pred = labels(&p);
        let a = metric_report(&gold, &pred).unwrap();
        let b = metric_report(&GoldLabels::new(flip(gold.entries())).unwrap(), &flip(&pred)).unwrap();
        prop_assert!((a.f1_macro - b.f1_macro).abs() <= 1e-15);
        prop_assert_eq!(a.f1_binary, b.f1_neg);
        prop_assert_eq!(a.precision_pos, b.precision_neg);
        prop_assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn perfect_prediction_scores_one(g in prop::collection::vec(any::<bool>(), 1..40)) {
        let r = metric_report(&gold_of(&g), &labels(&g)).unwrap();
        prop_assert_eq!(r.accuracy, 1.0);
        prop_assert_eq!(r.f1_binary, if g.iter().any(|&b| b) { 1.0 } else { 0.0 });
        let both = g.iter().any(|&b| b) && g.iter().any(|&b| !b);
        prop_assert_eq!(r.f1_macro == 1.0, both);
    }

    #[test]
    fn metric_report_is_pure((g, p) in paired_bits()) {
        let gold = gold_of(&g);
        let pred = labels(&p);
        let a: MetricReport = metric_report(&gold, &pred).unwrap();
        let b = metric_report(&gold, &pred).unwrap();
        prop_assert_eq!(a.f1_macro.to_bits(), b.f1_macro.to_bits());
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a.f1_macro));
        let c = a.counts;
        prop_assert_eq!(c.total() as usize, g.len());
        prop_assert!((a.accuracy - (c.tp + c.tn) as f64 / g.len() as f64).abs() <= 1e-15);
    }

    #[test]
    fn skew_rate_matches_confusion((g, p) in paired_bits()) {
        let gold = gold_of(&g);
        let pred = labels(&p);
        let c = confusion(&gold, &pred).unwrap();
        let s = prediction_skew(&pred, &gold, &CollapseRule::default()).unwrap();
        prop_assert_eq!(s.positive_rate, (c.tp + c.fp) as f64 / c.total() as f64);
    }

    #[test]
    fn soft_vote_stays_in_unit_interval(
        (a, b, w) in (1usize..30).prop_flat_map(|n| (probs(n), probs(n), 0.0f64..=1.0))
    ) {
        let ra = run_from("a", &a);
        let rb = run_from("b", &b);
        let out = soft_vote(&[&ra, &rb], &[w, 1.0 - w]).unwrap();
        for (i, (_, &p)) in out.probs().iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(a[i].min(b[i]) <= p && p <= a[i].max(b[i]));
        }
    }

    #[test]
    fn uniform_vote_of_copies_is_identity(a in (1usize..30).prop_flat_map(probs), k in 1usize..5) {
        let r = run_from("a", &a);
        let copies: Vec<_> = (0..k).map(|i| r.clone().with_model_id(format!("m{i}"))).collect();
        let refs: Vec<_> = copies.iter().collect();
        let out = uniform_vote(&refs).unwrap();
        prop_assert_eq!(out.probs(), r.probs());
    }

    #[test]
    fn majority_baseline_increasing_and_bounded(x in 0.0001f64..1.0, y in 0.0001f64..1.0) {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let a = majority_baseline(lo).unwrap();
        let b = majority_baseline(hi).unwrap();
        prop_assert!(a <= 0.5 && b <= 0.5);
        if lo < hi {
            prop_assert!(a < b);
        }
    }

    #[test]
    fn shift_groups_partition(
        delta in -0.2f64..0.2,
        rate in 0.0f64..=1.0,
        recall in 0.0f64..=1.0,
        band in 0.0f64..0.1,
    ) {
        let skew = SkewReport::from_rates(rate, recall, &CollapseRule::default());
        let g = classify_shift(delta, Some(&skew), band);
        let hits = [
            g == ShiftGroup::AnomalousGain && delta > band && skew.collapsed,
            g == ShiftGroup::Gain && delta > band && !skew.collapsed,
            g == ShiftGroup::Stable && delta.abs() <= band + 1e-9,
            g == ShiftGroup::Loss && delta < -band,
        ];
        prop_assert_eq!(hits.iter().filter(|&&h| h).count(), 1);
        prop_assert_eq!(classify_shift(delta, None, band) == ShiftGroup::AnomalousGain, false);
    }

    #[test]
    fn delta_sota_antisymmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assert_eq!(delta_sota(a, b), -delta_sota(b, a));
    }

    #[test]
    fn bands_partition_tracks(
        scores in prop::collection::vec((0.5f64..0.95, 0.0f64..0.15), 1..30),
        floor in -0.08f64..0.0,
        gap in 0.0f64..0.05,
    ) {
        let cutoff = floor - gap;
        let entries: Vec<_> = scores
            .iter()
            .enumerate()
            .map(|(i, &(o, d))| LeaderboardEntry::new(format!("t{i:02}"), o, o + d, None))
            .collect();
        let w = proximity_window(&entries, floor);
        let c = challenge_tracks(&entries, cutoff);
        let m = mid_band(&entries, floor, cutoff);
        prop_assert!(w.iter().all(|e| !c.iter().any(|x| x.track == e.track)));
        prop_assert_eq!(w.len() + c.len() + m.len(), entries.len());
    }

    #[test]
    fn reduction_flips_sign_on_swap(a in 0.5f64..3.0, b in 0.5f64..3.0) {
        let fwd = reduction_raw(a, b).unwrap();
        let back = reduction_raw(b, a).unwrap();
        prop_assert!(fwd == 0.0 && back == 0.0 || fwd.signum() == -back.signum());
    }

    #[test]
    fn fragmentation_is_micro_averaged(
        left in prop::collection::vec("[a-d]{1,8}", 1..60),
        right in prop::collection::vec("[a-d]{1,8}", 1..60),
    ) {
        let vocab = SubwordVocabulary::new(["a", "ab", "abc", "b", "c", "##a", "##b", "##cd", "##d"]).unwrap();
        let tok = GreedyTokenizer::new("toy", vocab);
        let l = fragmentation_ratio("l", &left, &tok, ExecMode::Serial).unwrap();
        let r = fragmentation_ratio("r", &right, &tok, ExecMode::Serial).unwrap();
        let all: Vec<_> = left.iter().chain(&right).cloned().collect();
        let both = fragmentation_ratio("lr", &all, &tok, ExecMode::Parallel).unwrap();
        let weighted = (l.ratio * left.len() as f64 + r.ratio * right.len() as f64)
            / (left.len() + right.len()) as f64;
        prop_assert!((both.ratio - weighted).abs() <= 1e-12);
    }

    #[test]
    fn greedy_tokenizer_total_and_deterministic(word in "\\PZ{1,12}") {
        prop_assume!(!word.chars().any(char::is_whitespace));
        let vocab = SubwordVocabulary::new(["a", "##a", "b", "##b"]).unwrap();
        let n = tokenize_word(&vocab, &word).unwrap();
        prop_assert!(n >= 1);
        prop_assert_eq!(n, tokenize_word(&vocab, &word).unwrap());
    }

    #[test]
    fn decide_ignores_candidate_order(
        scores in prop::collection::vec((0.5f64..0.9, 0.0f64..0.1), 1..6),
        base in (0.5f64..0.9, 0.0f64..0.1),
        rotate in 0usize..6,
    ) {
        let eval = |id: String, role, (f1, gap): (f64, f64)| CandidateEvaluation {
            model_id: id,
            role,
            dev_report: report_with(f1, gap),
        };
        let baseline = eval("base".into(), Role::Baseline, base);
        let cands: Vec<_> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| eval(format!("c{i}"), Role::Specialist, s))
            .collect();
        let mut rotated = cands.clone();
        rotated.rotate_left(rotate % cands.len());
        rotated.reverse();
        let policy = SelectionPolicy::default();
        prop_assert_eq!(
            decide("t", &baseline, &cands, &policy).unwrap(),
            decide("t", &baseline, &rotated, &policy).unwrap()
        );
        let empty = decide("t", &baseline, &[], &policy).unwrap();
        prop_assert_eq!(empty.rule_fired, Rule::BaselineRetained);
    }

    #[test]
    fn predictions_and_gold_round_trip(
        (p, g) in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(0u32..=1_000_000, n),
            prop::collection::vec(any::<bool>(), n),
        ))
    ) {
        let probs: Vec<f64> = p.iter().map(|&k| k as f64 / 1e6).collect();
        let run = run_from("m", &probs);
        let text = emit_predictions(&run);
        let back = read_predictions(text.as_bytes(), "p.csv".as_ref(), run.meta().clone()).unwrap();
        prop_assert_eq!(&back, &run);
        prop_assert_eq!(emit_predictions(&back), text);
        let gold = gold_of(&g);
        let gtext = emit_gold(&gold);
        prop_assert_eq!(read_gold(gtext.as_bytes(), "g.csv".as_ref()).unwrap(), gold);
    }
}

/// A report whose macro F1 and balance gap are the given values; the
/// policy reads nothing else.
fn report_with(f1: f64, gap: f64) -> MetricReport {
    let c = trackselect_core::metrics::ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 1 };
    let mut r = MetricReport::from_counts(c);
    r.f1_macro = f1;
    r.precision_pos = 0.5 + gap;
    r.precision_neg = 0.5 + gap;
    r.recall_pos = 0.5;
    r.recall_neg = 0.5;
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ledger_reads_back_k_appends(scores in prop::collection::vec((0u64..50, 0u64..50, 0u64..50, 0u64..50), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::new(dir.path().join("runs.jsonl"));
        let mut written = Vec::new();
        for (i, &(tp, fp, fn_, tn)) in scores.iter().enumerate() {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let counts = trackselect_core::metrics::ConfusionCounts { tp, fp, fn_, tn };
            let when = chrono::DateTime::from_timestamp(1_700_000_000 + i as i64, 123_456_000).unwrap();
            let meta = RunMeta::new("amh", format!("m{i}"), Split::Dev);
            let mut rec = RunRecord::at(when, &meta, None, MetricReport::from_counts(counts));
            rec = rec.with_provenance(BTreeMap::from([("seed".to_string(), serde_json::json!(i))]));
            ledger.append(&rec).unwrap();
            written.push(rec);
        }
        prop_assert_eq!(ledger.read_all().unwrap(), written);
    }
}
