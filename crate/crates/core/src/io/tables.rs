use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragmentation::CountsTable;
use crate::metrics::{GoldLabels, Label, LabelMap, PredictionRun, RunMeta};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

/// Reads a two-column CSV whose header must be exactly `header`, yielding
/// `(line, first, second)` per data row.
fn read_pairs<R: Read>(
    reader: R,
    source: &Path,
    header: [&str; 2],
) -> Result<Vec<(u64, String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        None => {
            return Err(Error::EmptyInput {
                path: source.to_path_buf(),
            })
        }
        Some(r) => r.map_err(|e| csv_err(source, e))?,
    };
    let line = first.position().map(|p| p.line()).unwrap_or(1);
    if first.len() != 2 || first[0].trim_start_matches('\u{feff}') != header[0] || &first[1] != header[1]
    {
        return Err(parse_err(
            source,
            line,
            format!(
                "expected header `{},{}`, found `{}`",
                header[0],
                header[1],
                first.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(
                source,
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        if rec[0].is_empty() {
            return Err(parse_err(source, line, "empty id"));
        }
        rows.push((line, rec[0].to_string(), rec[1].to_string()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: source.to_path_buf(),
        });
    }
    Ok(rows)
}

pub fn read_predictions<R: Read>(reader: R, source: &Path, meta: RunMeta) -> Result<PredictionRun> {
    let mut probs = BTreeMap::new();
    for (line, id, raw) in read_pairs(reader, source, ["id", "prob"])? {
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| parse_err(source, line, format!("`{raw}` is not a number")))?;
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::Range {
                path: source.to_path_buf(),
                line,
                id,
                value: raw,
            });
        }
        if probs.insert(id.clone(), value).is_some() {
            return Err(Error::DuplicateId {
                path: source.to_path_buf(),
                line,
                id,
            });
        }
    }
    PredictionRun::new(meta, probs)
}

pub fn load_predictions(path: &Path, meta: RunMeta) -> Result<PredictionRun> {
    read_predictions(open(path)?, path, meta)
}

pub fn read_gold<R: Read>(reader: R, source: &Path) -> Result<GoldLabels> {
    let mut entries = LabelMap::new();
    for (line, id, raw) in read_pairs(reader, source, ["id", "label"])? {
        let label = match raw.trim() {
            "0" => Label::Neutral,
            "1" => Label::Polarized,
            other => {
                return Err(parse_err(
                    source,
                    line,
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        if entries.insert(id.clone(), label).is_some() {
            return Err(Error::DuplicateId {
                path: source.to_path_buf(),
                line,
                id,
            });
        }
    }
    GoldLabels::new(entries)
}

pub fn load_gold(path: &Path) -> Result<GoldLabels> {
    read_gold(open(path)?, path)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// `id,prob` with six decimals, ids in ascending order.
pub fn emit_predictions(run: &PredictionRun) -> String {
    let mut w = writer();
    w.write_record(["id", "prob"]).expect("in-memory write");
    for (id, p) in run.probs() {
        w.write_record([id.as_str(), &format!("{p:.6}")])
            .expect("in-memory write");
    }
    finish(w)
}

pub fn emit_gold(gold: &GoldLabels) -> String {
    let mut w = writer();
    w.write_record(["id", "label"]).expect("in-memory write");
    for (id, l) in gold.entries() {
        w.write_record([id.as_str(), &l.bit().to_string()])
            .expect("in-memory write");
    }
    finish(w)
}

/// Rows of a `word,subword_count` file, in file order.
pub fn load_counts(path: &Path, tokenizer_id: &str) -> Result<CountsTable> {
    let mut rows = Vec::new();
    for (line, word, raw) in read_pairs(open(path)?, path, ["word", "subword_count"])? {
        let count: usize = raw
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("`{raw}` is not a count")))?;
        rows.push((word, count));
    }
    Ok(CountsTable::new(tokenizer_id, rows))
}

pub fn emit_counts(table: &CountsTable) -> String {
    let mut w = writer();
    w.write_record(["word", "subword_count"])
        .expect("in-memory write");
    for (word, c) in &table.rows {
        w.write_record([word.as_str(), &c.to_string()])
            .expect("in-memory write");
    }
    finish(w)
}

/// Loads a headed CSV into `T`, column order free, unknown columns ignored.
pub fn load_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    Ok(rows)
}

pub fn write_rows<T: Serialize>(rows: &[T]) -> String {
    let mut w = writer();
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    finish(w)
}

/// `track,our_score,sota_score[,rank]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardCsvRow {
    pub track: String,
    pub our_score: f64,
    pub sota_score: f64,
    #[serde(default)]
    pub rank: Option<u32>,
}

/// `track,dev_f1,test_f1[,positive_rate,neutral_recall]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCsvRow {
    pub track: String,
    pub dev_f1: f64,
    pub test_f1: f64,
    #[serde(default)]
    pub positive_rate: Option<f64>,
    #[serde(default)]
    pub neutral_recall: Option<f64>,
}

/// `track,baseline_f1,augmented_f1,final_f1[,augmented_model]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCsvRow {
    pub track: String,
    pub baseline_f1: f64,
    pub augmented_f1: f64,
    pub final_f1: f64,
    #[serde(default)]
    pub augmented_model: Option<String>,
}

/// `track,organizer,inhouse`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextCsvRow {
    pub track: String,
    pub organizer: f64,
    pub inhouse: f64,
}

/// `track,baseline_score,chosen_score[,transition,architecture]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCsvRow {
    pub track: String,
    pub baseline_score: f64,
    pub chosen_score: f64,
    #[serde(default)]
    pub transition: Option<String>,
    #[serde(default)]
    pub architecture: Option<String>,
}

/// `language,base_tokenizer,base_ratio,spec_tokenizer,spec_ratio`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCsvRow {
    pub language: String,
    pub base_tokenizer: String,
    pub base_ratio: f64,
    pub spec_tokenizer: String,
    pub spec_ratio: f64,
}
