use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trackselect_core::calibration::{self, SearchGrid, SearchResult};
use trackselect_core::diagnostics::{self, CollapseRule, ShiftRecord, SkewReport};
use trackselect_core::ensemble::{self, EnsembleConfig, MemberWeight};
use trackselect_core::fragmentation::{
    self, FragmentationReport, FragmentationRow, GreedyTokenizer, SubwordVocabulary,
};
use trackselect_core::io::{self as tio, Ledger, Registry, RunRecord};
use trackselect_core::leaderboard::{self, AblationInput, LeaderboardEntry};
use trackselect_core::metrics::{self, MetricReport, PredictionRun, RunMeta, Split};
use trackselect_core::report::{self, ReportSettings};
use trackselect_core::selection::{self, CandidateEvaluation, LedgerEntry, SelectionPolicy};
use trackselect_core::{Error, ErrorCategory, ExecMode};

#[derive(Parser)]
#[command(name = "trackselect", version, about = "Per-track model selection and analysis")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write output to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run searches and corpus scans on one thread.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Md,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Score one prediction file against gold labels.
    Evaluate(EvaluateArgs),
    /// Soft-vote several prediction files.
    Ensemble(EnsembleArgs),
    /// Grid-search mixing weight and threshold on dev data.
    Tune(TuneArgs),
    /// Apply the selection policy to candidates, or replay a selection table.
    Select(SelectArgs),
    /// Classify dev-to-test shifts.
    Shift(ShiftArgs),
    /// Proximity window, challenge set and baseline context.
    Leaderboard(LeaderboardArgs),
    /// Subword fragmentation ratios.
    Frag(FragArgs),
    /// Augmentation ablation summary.
    Ablation(AblationArgs),
    /// Regenerate Markdown reports from a ledger and registry.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Track code recorded with the run.
    #[arg(long, default_value = "unspecified")]
    track: String,
    /// Data split of the predictions.
    #[arg(long, default_value = "dev")]
    split: Split,
    /// Append the result to this JSONL ledger (relative paths resolve
    /// against $TRACKSELECT_LEDGER_DIR when set).
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Extra `key=value` metadata stored with the ledger record.
    #[arg(long, value_parser = parse_kv)]
    provenance: Vec<(String, serde_json::Value)>,
}

#[derive(Args)]
struct CollapseArgs {
    /// Positive rate at or above which a run may be collapsed.
    #[arg(long, default_value_t = 0.90)]
    min_positive_rate: f64,
    /// Neutral recall below which a high-positive-rate run is collapsed.
    #[arg(long, default_value_t = 0.50)]
    max_neutral_recall: f64,
}

impl CollapseArgs {
    fn rule(&self) -> CollapseRule {
        CollapseRule {
            min_positive_rate: self.min_positive_rate,
            max_neutral_recall: self.max_neutral_recall,
        }
    }
}

#[derive(Args)]
struct PolicyArgs {
    /// Minimum dev macro-F1 gain over the baseline.
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    min_gain: f64,
    /// Balance clause: allowed macro-F1 shortfall against the baseline.
    #[arg(long, default_value_t = 0.01)]
    balance_slack: f64,
    /// Balance clause: required reduction of |P_macro - R_macro|.
    #[arg(long, default_value_t = 0.02)]
    min_balance_improvement: f64,
}

impl PolicyArgs {
    fn policy(&self) -> SelectionPolicy {
        SelectionPolicy {
            min_gain: self.min_gain,
            balance_slack: self.balance_slack,
            min_balance_improvement: self.min_balance_improvement,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold labels, `id,label`.
    #[arg(long)]
    gold: PathBuf,
    /// Predictions, `id,prob`.
    #[arg(long)]
    pred: PathBuf,
    /// Model id; defaults to the prediction file stem.
    #[arg(long)]
    model: Option<String>,
    /// Decision threshold; `prob >= tau` is polarized.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    collapse: CollapseArgs,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Member prediction files, in mixing order.
    #[arg(long = "member", required = true, num_args = 1)]
    members: Vec<PathBuf>,
    /// Comma-separated weights, one per member; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Decision threshold; `prob >= tau` is polarized.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Gold labels; when given, the mixture is scored.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Write the mixed probabilities here as `id,prob`.
    #[arg(long)]
    pred_out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct TuneArgs {
    /// Dev gold labels, `id,label`.
    #[arg(long)]
    gold: PathBuf,
    /// Specialist predictions (weight alpha).
    #[arg(long, requires = "gen", conflicts_with = "members")]
    spec: Option<PathBuf>,
    /// Generalist predictions (weight 1 - alpha).
    #[arg(long, requires = "spec")]
    gen: Option<PathBuf>,
    /// One or more member files; one member tunes only the threshold, several
    /// try the uniform mean plus any `--weights` vectors.
    #[arg(long = "member", num_args = 1)]
    members: Vec<PathBuf>,
    /// Extra weight vector for `--member` mode, comma-separated; repeatable.
    #[arg(long, value_delimiter = ',', num_args = 1, action = clap::ArgAction::Append)]
    weights: Vec<f64>,
    /// Comma-separated alpha values [default: 0.00..1.00 step 0.05].
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// Comma-separated tau values [default: 0.30..0.70 step 0.05].
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    /// Write the full surface as `alpha,tau,macro_f1` here.
    #[arg(long)]
    surface: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
#[group(id = "select_input", required = true, multiple = false)]
struct SelectInput {
    /// JSON: `{"track": .., "candidates": [{model_id, role, dev_report}]}`
    /// or a list of such objects.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// CSV `track,baseline_score,chosen_score[,transition,architecture]`.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: SelectInput,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct ShiftArgs {
    /// CSV `track,dev_f1,test_f1[,positive_rate,neutral_recall]`.
    #[arg(long)]
    scores: PathBuf,
    /// Half-width of the stable band.
    #[arg(long, default_value_t = 0.02)]
    band: f64,
    #[command(flatten)]
    collapse: CollapseArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum View {
    All,
    Window,
    Challenge,
    Mid,
}

#[derive(Args)]
#[group(id = "leaderboard_input", required = true, multiple = false)]
struct LeaderboardInput {
    /// CSV `track,our_score,sota_score[,rank]`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// CSV `track,organizer,inhouse`: compare two baselines instead.
    #[arg(long)]
    context: Option<PathBuf>,
}

#[derive(Args)]
struct LeaderboardArgs {
    #[command(flatten)]
    input: LeaderboardInput,
    /// Smallest delta to SOTA inside the proximity window (inclusive).
    #[arg(long, default_value_t = leaderboard::DEFAULT_WINDOW_FLOOR, allow_negative_numbers = true)]
    window: f64,
    /// Deltas strictly below this are challenge tracks.
    #[arg(long, default_value_t = leaderboard::DEFAULT_CHALLENGE_CUTOFF, allow_negative_numbers = true)]
    cutoff: f64,
    /// Which band(s) to print.
    #[arg(long, value_enum, default_value_t = View::All)]
    view: View,
}

#[derive(Args)]
struct FragArgs {
    /// CSV `language,base_tokenizer,base_ratio,spec_tokenizer,spec_ratio`:
    /// compute reductions for precomputed ratios.
    #[arg(long, conflicts_with_all = ["base", "spec", "base_vocab", "spec_vocab"])]
    ratios: Option<PathBuf>,
    /// Generalist `word,subword_count` file.
    #[arg(long, conflicts_with = "base_vocab")]
    base: Option<PathBuf>,
    /// Specialist `word,subword_count` file.
    #[arg(long, conflicts_with = "spec_vocab")]
    spec: Option<PathBuf>,
    /// Generalist vocabulary, one token per line; needs `--corpus`.
    #[arg(long, requires = "corpus")]
    base_vocab: Option<PathBuf>,
    /// Specialist vocabulary, one token per line; needs `--corpus`.
    #[arg(long, requires = "corpus")]
    spec_vocab: Option<PathBuf>,
    /// Whitespace-separated corpus; counts files become word lookups.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Generalist tokenizer id; defaults to the file stem.
    #[arg(long)]
    base_id: Option<String>,
    /// Specialist tokenizer id; defaults to the file stem.
    #[arg(long)]
    spec_id: Option<String>,
    /// Language code for the output row.
    #[arg(long, default_value = "unspecified")]
    lang: String,
    /// Cost of a word the vocabulary cannot segment.
    #[arg(long, default_value_t = 1)]
    unk_cost: usize,
}

#[derive(Args)]
struct AblationArgs {
    /// CSV `track,baseline_f1,augmented_f1,final_f1[,augmented_model]`.
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// JSONL run ledger.
    #[arg(long)]
    ledger: PathBuf,
    /// Track registry JSON.
    #[arg(long)]
    registry: PathBuf,
    /// Directory for the Markdown files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Half-width of the stable dev-to-test band.
    #[arg(long, default_value_t = 0.02)]
    band: f64,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    collapse: CollapseArgs,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_kv(s: &str) -> std::result::Result<(String, serde_json::Value), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("`{s}` is not key=value"))?;
    if k.is_empty() {
        return Err(format!("`{s}` has an empty key"));
    }
    let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.into()));
    Ok((k.to_string(), value))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn append_record(run: &RunArgs, record: RunRecord) -> Outcome<()> {
    let Some(path) = &run.ledger else {
        return Ok(());
    };
    let record = if run.provenance.is_empty() {
        record
    } else {
        record.with_provenance(run.provenance.iter().cloned().collect())
    };
    Ledger::new(tio::resolve_ledger_path(path)).append(&record)?;
    Ok(())
}

fn mode(cli: &Cli) -> ExecMode {
    if cli.serial {
        ExecMode::Serial
    } else {
        ExecMode::default()
    }
}

#[derive(Serialize)]
struct MetricsCsvRow<'a> {
    track: &'a str,
    model_id: &'a str,
    split: Split,
    tau: f64,
    n: u64,
    accuracy: f64,
    precision_pos: f64,
    recall_pos: f64,
    f1_binary: f64,
    precision_neg: f64,
    recall_neg: f64,
    f1_neg: f64,
    f1_macro: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tn: u64,
}

impl<'a> MetricsCsvRow<'a> {
    fn new(meta: &'a RunMeta, tau: f64, r: &MetricReport) -> Self {
        Self {
            track: &meta.track,
            model_id: &meta.model_id,
            split: meta.split,
            tau,
            n: r.n,
            accuracy: r.accuracy,
            precision_pos: r.precision_pos,
            recall_pos: r.recall_pos,
            f1_binary: r.f1_binary,
            precision_neg: r.precision_neg,
            recall_neg: r.recall_neg,
            f1_neg: r.f1_neg,
            f1_macro: r.f1_macro,
            tp: r.counts.tp,
            fp: r.counts.fp,
            fn_: r.counts.fn_,
            tn: r.counts.tn,
        }
    }
}

#[derive(Serialize)]
struct Evaluation<'a> {
    track: &'a str,
    model_id: &'a str,
    split: Split,
    tau: f64,
    metrics: MetricReport,
    prevalence: f64,
    /// Macro F1 of always predicting polarized; absent without positives.
    majority_baseline: Option<f64>,
    skew: SkewReport,
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Outcome<String> {
    let gold = tio::load_gold(&a.gold)?;
    let model = a.model.clone().unwrap_or_else(|| stem(&a.pred));
    let meta = RunMeta::new(&a.run.track, model, a.run.split);
    let run = tio::load_predictions(&a.pred, meta.clone())?;
    let report = metrics::evaluate_run(&gold, &run, a.tau)?;
    let skew = SkewReport::from_counts(&report.counts, &a.collapse.rule());
    let config = EnsembleConfig::single(&meta.model_id, a.tau)?;
    append_record(&a.run, RunRecord::now(&meta, Some(config), report))?;
    Ok(match cli.format {
        Format::Json => json(&Evaluation {
            track: &meta.track,
            model_id: &meta.model_id,
            split: meta.split,
            tau: a.tau,
            metrics: report,
            prevalence: gold.prevalence(),
            majority_baseline: diagnostics::majority_baseline(gold.prevalence()).ok(),
            skew,
        }),
        Format::Csv => tio::write_rows(&[MetricsCsvRow::new(&meta, a.tau, &report)]),
        Format::Md => {
            let mut s = report::metrics_table(&[(meta.track.clone(), report)]);
            s.push_str(&format!(
                "\nPositive rate {:.3}, neutral recall {:.3}{}.\n",
                skew.positive_rate,
                skew.neutral_recall,
                if skew.collapsed { " (collapsed)" } else { "" }
            ));
            s
        }
    })
}

fn load_members(paths: &[PathBuf], run: &RunArgs) -> Outcome<Vec<PredictionRun>> {
    paths
        .iter()
        .map(|p| {
            let meta = RunMeta::new(&run.track, stem(p), run.split);
            tio::load_predictions(p, meta).map_err(Failure::from)
        })
        .collect()
}

#[derive(Serialize)]
struct EnsembleOut<'a> {
    model_id: String,
    config: &'a EnsembleConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricReport>,
}

fn ensemble_cmd(cli: &Cli, a: &EnsembleArgs) -> Outcome<String> {
    let runs = load_members(&a.members, &a.run)?;
    let refs: Vec<&PredictionRun> = runs.iter().collect();
    let weights = a
        .weights
        .clone()
        .unwrap_or_else(|| ensemble::uniform_weights(refs.len()));
    let config = EnsembleConfig::new(
        refs.iter()
            .zip(&weights)
            .map(|(r, &w)| MemberWeight {
                model_id: r.meta().model_id.clone(),
                weight: w,
            })
            .collect(),
        a.tau,
    );
    // A count mismatch is reported by soft_vote with both lengths.
    let mixed = ensemble::soft_vote(&refs, &weights)?;
    let config = config?;
    if let Some(path) = &a.pred_out {
        write_text(path, &tio::emit_predictions(&mixed))?;
    }
    let metrics = match &a.gold {
        Some(g) => {
            let gold = tio::load_gold(g)?;
            let report = metrics::evaluate_run(&gold, &mixed, a.tau)?;
            append_record(
                &a.run,
                RunRecord::now(mixed.meta(), Some(config.clone()), report),
            )?;
            Some(report)
        }
        None => None,
    };
    let model_id = mixed.meta().model_id.clone();
    Ok(match cli.format {
        Format::Json => json(&EnsembleOut {
            model_id,
            config: &config,
            metrics,
        }),
        Format::Csv => tio::emit_predictions(&mixed),
        Format::Md => {
            let mut s = format!("Ensemble `{model_id}`, τ={:.2}\n", a.tau);
            if let Some(r) = metrics {
                s.push('\n');
                s.push_str(&report::metrics_table(&[(a.run.track.clone(), r)]));
            }
            s
        }
    })
}

fn tune(cli: &Cli, a: &TuneArgs) -> Outcome<String> {
    let gold = tio::load_gold(&a.gold)?;
    let default_grid = SearchGrid::default();
    let taus = a.tau_grid.clone().unwrap_or(default_grid.tau_values.clone());
    let result: SearchResult = match (&a.spec, &a.gen) {
        (Some(spec), Some(gen)) => {
            let runs = load_members(&[spec.clone(), gen.clone()], &a.run)?;
            let grid = SearchGrid::new(
                a.alpha_grid.clone().unwrap_or(default_grid.alpha_values),
                taus,
            )?;
            calibration::tune_pair(&gold, &runs[0], &runs[1], &grid, mode(cli))?
        }
        _ => {
            if a.members.is_empty() {
                return Err(Failure::Usage(
                    "tune needs --spec and --gen, or at least one --member".into(),
                ));
            }
            if a.alpha_grid.is_some() {
                return Err(Failure::Usage(
                    "--alpha-grid applies only to --spec/--gen".into(),
                ));
            }
            let runs = load_members(&a.members, &a.run)?;
            let refs: Vec<&PredictionRun> = runs.iter().collect();
            if refs.len() == 1 {
                if !a.weights.is_empty() {
                    return Err(Failure::Usage("--weights needs several members".into()));
                }
                SearchGrid::new(vec![1.0], taus.clone())?;
                calibration::tune_threshold(&gold, refs[0], &taus, mode(cli))?
            } else {
                let k = refs.len();
                if !a.weights.len().is_multiple_of(k) {
                    return Err(Failure::Usage(format!(
                        "--weights gave {} values, not a multiple of {k} members",
                        a.weights.len()
                    )));
                }
                let extra: Vec<Vec<f64>> = a.weights.chunks(k).map(<[f64]>::to_vec).collect();
                SearchGrid::new(vec![1.0], taus.clone())?;
                calibration::tune_members(&gold, &refs, &extra, &taus, mode(cli))?
            }
        }
    };
    if let Some(path) = &a.surface {
        write_text(path, &result.surface_csv())?;
    }
    let meta = RunMeta::new(&a.run.track, result.best_config.mixture_id(), a.run.split);
    append_record(
        &a.run,
        RunRecord::now(&meta, Some(result.best_config.clone()), result.best_dev_report),
    )?;
    Ok(match cli.format {
        Format::Json => json(&result),
        Format::Csv => result.surface_csv(),
        Format::Md => {
            let best = result.best_cell();
            format!(
                "Best `{}` ({}): α={:.2}, τ={:.2}, macro F1 {:.4} over {} cells.\n",
                result.best_config.mixture_id(),
                report::weights_cell(&result.best_config),
                best.alpha,
                best.tau,
                best.macro_f1,
                result.full_surface.len(),
            )
        }
    })
}

#[derive(serde::Deserialize)]
struct CandidateSet {
    track: String,
    candidates: Vec<CandidateEvaluation>,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum CandidateFile {
    One(CandidateSet),
    Many(Vec<CandidateSet>),
}

fn select(cli: &Cli, a: &SelectArgs) -> Outcome<String> {
    let policy = a.policy.policy();
    if let Some(path) = &a.input.candidates {
        let text = read_text(path)?;
        let file: CandidateFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let sets = match file {
            CandidateFile::One(s) => vec![s],
            CandidateFile::Many(v) => v,
        };
        let decisions = sets
            .iter()
            .map(|s| selection::decide_among(&s.track, &s.candidates, &policy))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(match cli.format {
            Format::Json => json(&decisions),
            Format::Csv => tio::write_rows(&decisions),
            Format::Md => report::decisions_table(&decisions),
        });
    }
    let path = a.input.replay.as_ref().expect("clap enforces one input");
    let entries = tio::load_rows::<tio::ReplayCsvRow>(path)?
        .into_iter()
        .map(|r| {
            let transition = r
                .transition
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(Error::InvalidRecord))
                .transpose()?;
            Ok(LedgerEntry {
                track: r.track,
                architecture: r.architecture.filter(|s| !s.is_empty()),
                transition,
                baseline_score: r.baseline_score,
                chosen_score: r.chosen_score,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let rows = selection::ledger_replay(&entries, &policy);
    Ok(match cli.format {
        Format::Json => json(&rows),
        Format::Csv => tio::write_rows(&rows),
        Format::Md => report::replay_table(&rows),
    })
}

#[derive(Serialize)]
struct ShiftCsvOut<'a> {
    track: &'a str,
    dev_f1: f64,
    test_f1: f64,
    delta: f64,
    group: String,
    positive_rate: Option<f64>,
    neutral_recall: Option<f64>,
    collapsed: Option<bool>,
}

fn shift(cli: &Cli, a: &ShiftArgs) -> Outcome<String> {
    let rule = a.collapse.rule();
    let records = tio::load_rows::<tio::ShiftCsvRow>(&a.scores)?
        .into_iter()
        .map(|r| {
            let skew = match (r.positive_rate, r.neutral_recall) {
                (Some(p), Some(n)) => Some(SkewReport::from_rates(p, n, &rule)),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidRecord(format!(
                        "track `{}` needs both positive_rate and neutral_recall, or neither",
                        r.track
                    )))
                }
            };
            Ok(ShiftRecord::with_band(r.track, r.dev_f1, r.test_f1, skew, a.band))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(match cli.format {
        Format::Json => json(&records),
        Format::Csv => tio::write_rows(
            &records
                .iter()
                .map(|r| ShiftCsvOut {
                    track: &r.track,
                    dev_f1: r.dev_f1,
                    test_f1: r.test_f1,
                    delta: r.delta,
                    group: r.group.to_string(),
                    positive_rate: r.skew.map(|s| s.positive_rate),
                    neutral_recall: r.skew.map(|s| s.neutral_recall),
                    collapsed: r.skew.map(|s| s.collapsed),
                })
                .collect::<Vec<_>>(),
        ),
        Format::Md => report::shift_table(&records),
    })
}

#[derive(Serialize)]
struct Bands {
    window: Vec<LeaderboardEntry>,
    challenge: Vec<LeaderboardEntry>,
    mid_band: Vec<LeaderboardEntry>,
}

#[derive(Serialize)]
struct BandCsvRow<'a> {
    band: &'static str,
    track: &'a str,
    rank: Option<u32>,
    our_score: f64,
    sota_score: f64,
    delta_sota: f64,
}

fn leaderboard_cmd(cli: &Cli, a: &LeaderboardArgs) -> Outcome<String> {
    if let Some(path) = &a.input.context {
        let rows = tio::load_rows::<tio::ContextCsvRow>(path)?;
        let mut org = BTreeMap::new();
        let mut own = BTreeMap::new();
        for r in rows {
            if org.insert(r.track.clone(), r.organizer).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate track `{}`", r.track)).into());
            }
            own.insert(r.track, r.inhouse);
        }
        let context = leaderboard::baseline_context(&org, &own)?;
        return Ok(match cli.format {
            Format::Json => json(&context),
            Format::Csv => tio::write_rows(&context),
            Format::Md => report::context_table(&context),
        });
    }
    let path = a.input.scores.as_ref().expect("clap enforces one input");
    let entries: Vec<LeaderboardEntry> = tio::load_rows::<tio::LeaderboardCsvRow>(path)?
        .into_iter()
        .map(|r| LeaderboardEntry::new(r.track, r.our_score, r.sota_score, r.rank))
        .collect();
    let bands = Bands {
        window: leaderboard::proximity_window(&entries, a.window),
        challenge: leaderboard::challenge_tracks(&entries, a.cutoff),
        mid_band: leaderboard::mid_band(&entries, a.window, a.cutoff),
    };
    let parts: Vec<(&'static str, &Vec<LeaderboardEntry>)> = match a.view {
        View::All => vec![
            ("window", &bands.window),
            ("challenge", &bands.challenge),
            ("mid", &bands.mid_band),
        ],
        View::Window => vec![("window", &bands.window)],
        View::Challenge => vec![("challenge", &bands.challenge)],
        View::Mid => vec![("mid", &bands.mid_band)],
    };
    Ok(match cli.format {
        Format::Json if a.view == View::All => json(&bands),
        Format::Json => json(parts[0].1),
        Format::Csv => tio::write_rows(
            &parts
                .iter()
                .flat_map(|(band, list)| {
                    list.iter().map(move |e| BandCsvRow {
                        band,
                        track: &e.track,
                        rank: e.rank,
                        our_score: e.our_score,
                        sota_score: e.sota_score,
                        delta_sota: e.delta_sota,
                    })
                })
                .collect::<Vec<_>>(),
        ),
        Format::Md => parts
            .iter()
            .map(|(band, list)| match *band {
                "window" => report::window_table(list),
                _ => report::challenge_table(list),
            })
            .collect::<Vec<_>>()
            .join("\n"),
    })
}

fn load_vocab(path: &Path, unk_cost: usize) -> Outcome<SubwordVocabulary> {
    let text = read_text(path)?;
    Ok(SubwordVocabulary::with_options(
        text.lines().map(str::trim).filter(|l| !l.is_empty()),
        fragmentation::DEFAULT_CONTINUATION_PREFIX,
        unk_cost,
    )?)
}

fn frag(cli: &Cli, a: &FragArgs) -> Outcome<String> {
    let rows: Vec<FragmentationRow> = if let Some(path) = &a.ratios {
        tio::load_rows::<tio::RatioCsvRow>(path)?
            .into_iter()
            .map(|r| {
                Ok(FragmentationRow {
                    reduction_pct: fragmentation::reduction(r.base_ratio, r.spec_ratio)?,
                    language: r.language,
                    base_tokenizer: r.base_tokenizer,
                    base_ratio: r.base_ratio,
                    spec_tokenizer: r.spec_tokenizer,
                    spec_ratio: r.spec_ratio,
                })
            })
            .collect::<Result<_, Error>>()?
    } else {
        let corpus_text = a.corpus.as_ref().map(|p| read_text(p)).transpose()?;
        let words: Option<Vec<&str>> = corpus_text.as_deref().map(fragmentation::split_words);
        let corpus_id = a.corpus.as_deref().map(stem).unwrap_or_else(|| a.lang.clone());
        let side = |counts: &Option<PathBuf>,
                    vocab: &Option<PathBuf>,
                    id: &Option<String>,
                    flag: &str|
         -> Outcome<FragmentationReport> {
            match (counts, vocab) {
                (Some(p), None) => {
                    let table = tio::load_counts(p, &id.clone().unwrap_or_else(|| stem(p)))?;
                    match &words {
                        Some(w) => Ok(fragmentation::fragmentation_ratio(
                            &corpus_id,
                            w,
                            &table.lookup()?,
                            mode(cli),
                        )?),
                        None => Ok(table.report(&corpus_id)?),
                    }
                }
                (None, Some(p)) => {
                    let tok = GreedyTokenizer::new(
                        id.clone().unwrap_or_else(|| stem(p)),
                        load_vocab(p, a.unk_cost)?,
                    );
                    let w = words.as_ref().expect("clap requires --corpus");
                    Ok(fragmentation::fragmentation_ratio(&corpus_id, w, &tok, mode(cli))?)
                }
                _ => Err(Failure::Usage(format!(
                    "frag needs --{flag} or --{flag}-vocab (or --ratios)"
                ))),
            }
        };
        let base = side(&a.base, &a.base_vocab, &a.base_id, "base")?;
        let spec = side(&a.spec, &a.spec_vocab, &a.spec_id, "spec")?;
        vec![FragmentationRow::from_reports(&a.lang, &base, &spec)?]
    };
    Ok(match cli.format {
        Format::Json => json(&rows),
        Format::Csv => tio::write_rows(&rows),
        Format::Md => report::fragmentation_table(&rows),
    })
}

#[derive(Serialize)]
struct AblationCsvOut<'a> {
    track: &'a str,
    augmented_model: Option<&'a str>,
    baseline_f1: f64,
    augmented_f1: f64,
    final_f1: f64,
    winner: &'static str,
    degraded: bool,
    final_below_baseline: bool,
}

fn ablation(cli: &Cli, a: &AblationArgs) -> Outcome<String> {
    let inputs: Vec<AblationInput> = tio::load_rows::<tio::AblationCsvRow>(&a.scores)?
        .into_iter()
        .map(|r| AblationInput {
            track: r.track,
            augmented_model: r.augmented_model.filter(|s| !s.is_empty()),
            baseline_f1: r.baseline_f1,
            augmented_f1: r.augmented_f1,
            final_f1: r.final_f1,
        })
        .collect();
    let rep = leaderboard::ablation_report(&inputs)?;
    Ok(match cli.format {
        Format::Json => json(&rep),
        Format::Csv => tio::write_rows(
            &rep.rows
                .iter()
                .map(|r| AblationCsvOut {
                    track: &r.input.track,
                    augmented_model: r.input.augmented_model.as_deref(),
                    baseline_f1: r.input.baseline_f1,
                    augmented_f1: r.input.augmented_f1,
                    final_f1: r.input.final_f1,
                    winner: match r.winner {
                        leaderboard::AblationWinner::Augmented => "augmented",
                        leaderboard::AblationWinner::Final => "final",
                    },
                    degraded: r.degraded,
                    final_below_baseline: r.final_below_baseline,
                })
                .collect::<Vec<_>>(),
        ),
        Format::Md => report::ablation_table(&rep),
    })
}

fn report_cmd(cli: &Cli, a: &ReportArgs) -> Outcome<String> {
    let ledger = Ledger::new(tio::resolve_ledger_path(&a.ledger));
    let records = ledger.read_all()?;
    let registry = Registry::load(&a.registry)?;
    let settings = ReportSettings {
        policy: a.policy.policy(),
        collapse: a.collapse.rule(),
        stability_band: Some(a.band),
    };
    let files = report::regenerate(&records, &registry, &settings)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Failure::Io(a.out_dir.clone(), e))?;
    let mut written = Vec::new();
    for (name, content) in &files {
        let path = a.out_dir.join(name);
        write_text(&path, content)?;
        written.push(path.display().to_string());
    }
    Ok(match cli.format {
        Format::Json => json(&written),
        Format::Csv | Format::Md => written.join("\n") + "\n",
    })
}

fn run(cli: &Cli) -> Outcome<String> {
    match &cli.command {
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Ensemble(a) => ensemble_cmd(cli, a),
        Command::Tune(a) => tune(cli, a),
        Command::Select(a) => select(cli, a),
        Command::Shift(a) => shift(cli, a),
        Command::Leaderboard(a) => leaderboard_cmd(cli, a),
        Command::Frag(a) => frag(cli, a),
        Command::Ablation(a) => ablation(cli, a),
        Command::Report(a) => report_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| match &cli.output {
        Some(path) => write_text(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(4)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e.category() {
                ErrorCategory::Io => ExitCode::from(4),
                ErrorCategory::Validation => ExitCode::from(3),
            }
        }
    }
}
