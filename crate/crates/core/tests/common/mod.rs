//! Shared helpers for the integration tests: fixture paths, random
//! instances and a brute-force metric recount.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use trackselect_core::metrics::{GoldLabels, Label, PredictionRun, RunMeta, Split};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i:03}")).collect()
}

pub fn random_gold<R: Rng>(rng: &mut R, n: usize) -> GoldLabels {
    GoldLabels::from_pairs(
        ids(n)
            .into_iter()
            .map(|id| (id, Label::from_bit(rng.gen_range(0..=1)).unwrap())),
    )
    .unwrap()
}

/// Probabilities drawn from a small lattice, so ties with grid thresholds
/// actually occur.
pub fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                rng.gen_range(0..=20) as f64 / 20.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect()
}

pub fn run_from(model: &str, probs: &[f64]) -> PredictionRun {
    PredictionRun::from_pairs(
        RunMeta::new("t", model, Split::Dev),
        ids(probs.len()).into_iter().zip(probs.iter().copied()),
    )
    .unwrap()
}

/// Independent recount: (accuracy, p_pos, r_pos, f1_pos, p_neg, r_neg, f1_neg, f1_macro).
pub fn brute_force(gold: &[u8], probs: &[f64], tau: f64) -> [f64; 8] {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    let mut tn = 0.0;
    for (&g, &p) in gold.iter().zip(probs) {
        let pred = if p >= tau { 1 } else { 0 };
        match (g, pred) {
            (1, 1) => tp += 1.0,
            (0, 1) => fp += 1.0,
            (1, 0) => fn_ += 1.0,
            _ => tn += 1.0,
        }
    }
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let p_pos = div(tp, tp + fp);
    let r_pos = div(tp, tp + fn_);
    let p_neg = div(tn, tn + fn_);
    let r_neg = div(tn, tn + fp);
    let f_pos = f1(p_pos, r_pos);
    let f_neg = f1(p_neg, r_neg);
    [
        div(tp + tn, tp + fp + fn_ + tn),
        p_pos,
        r_pos,
        f_pos,
        p_neg,
        r_neg,
        f_neg,
        (f_pos + f_neg) / 2.0,
    ]
}

pub fn gold_bits(gold: &GoldLabels) -> Vec<u8> {
    gold.entries().values().map(|l| l.bit()).collect()
}
