//! Append-only development ledger, one JSON object per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, RunMeta, Split};

/// Directory that relative ledger paths are resolved against, when set.
pub const LEDGER_DIR_ENV: &str = "TRACKSELECT_LEDGER_DIR";

pub fn resolve_ledger_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(root) = std::env::var_os(LEDGER_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(root).join(path);
        }
    }
    path.to_path_buf()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// UTC, RFC 3339.
    pub timestamp: String,
    pub track: String,
    pub model_id: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<EnsembleConfig>,
    pub metrics: MetricReport,
    /// Free-form metadata (seed, learning rate, ...); stored, never read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<BTreeMap<String, serde_json::Value>>,
}

impl RunRecord {
    pub fn now(meta: &RunMeta, config: Option<EnsembleConfig>, metrics: MetricReport) -> Self {
        Self::at(Utc::now(), meta, config, metrics)
    }

    pub fn at(
        when: DateTime<Utc>,
        meta: &RunMeta,
        config: Option<EnsembleConfig>,
        metrics: MetricReport,
    ) -> Self {
        Self {
            timestamp: when.to_rfc3339_opts(SecondsFormat::Micros, true),
            track: meta.track.clone(),
            model_id: meta.model_id.clone(),
            split: meta.split,
            config,
            metrics,
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: BTreeMap<String, serde_json::Value>) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn key(&self) -> (&str, &str, &str, Split) {
        (&self.timestamp, &self.track, &self.model_id, self.split)
    }

    fn key_string(&self) -> String {
        format!(
            "({}, {}, {}, {})",
            self.timestamp, self.track, self.model_id, self.split
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ts = DateTime::parse_from_rfc3339(&self.timestamp).map_err(|e| {
            Error::InvalidRecord(format!("timestamp `{}`: {e}", self.timestamp))
        })?;
        if ts.offset().local_minus_utc() != 0 {
            return Err(Error::InvalidRecord(format!(
                "timestamp `{}` is not UTC",
                self.timestamp
            )));
        }
        if self.track.is_empty() || self.model_id.is_empty() {
            return Err(Error::InvalidRecord("empty track or model id".into()));
        }
        if let Some(cfg) = &self.config {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Handle on a JSONL ledger file. Appends go through `&mut self`, so one
/// handle is one writer.
#[derive(Debug)]
pub struct Ledger {
    path: PathBuf,
}

impl Ledger {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records in append order; a missing file is an empty ledger.
    pub fn read_all(&self) -> Result<Vec<RunRecord>> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RunRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: self.path.clone(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Appends one record; fails without writing if its key already exists.
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        record.validate()?;
        let existing = self.read_all()?;
        if existing.iter().any(|r| r.key() == record.key()) {
            return Err(Error::Conflict(record.key_string()));
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut line = record.to_line();
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionCounts, MetricReport};
    use chrono::TimeZone;

    fn record(secs: i64, model: &str) -> RunRecord {
        let when = Utc.timestamp_opt(1_760_000_000 + secs, 0).unwrap();
        let metrics = MetricReport::from_counts(ConfusionCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        });
        RunRecord::at(when, &RunMeta::new("eng", model, Split::Dev), None, metrics)
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::new(dir.path().join("sub/ledger.jsonl"));
        assert!(ledger.read_all().unwrap().is_empty());
        let a = record(0, "a").with_provenance(BTreeMap::from([(
            "seed".to_string(),
            serde_json::json!(42),
        )]));
        let b = record(1, "b");
        ledger.append(&a).unwrap();
        ledger.append(&b).unwrap();
        assert_eq!(ledger.read_all().unwrap(), vec![a, b]);
    }

    #[test]
    fn duplicate_key_leaves_file_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::new(dir.path().join("l.jsonl"));
        let a = record(0, "a");
        ledger.append(&a).unwrap();
        let before = std::fs::read(ledger.path()).unwrap();
        assert!(matches!(ledger.append(&a), Err(Error::Conflict(_))));
        assert_eq!(std::fs::read(ledger.path()).unwrap(), before);
    }

    #[test]
    fn rejects_non_utc_timestamp() {
        let mut r = record(0, "a");
        r.timestamp = "2025-10-09T10:00:00+02:00".into();
        assert!(r.validate().is_err());
        r.timestamp = "yesterday".into();
        assert!(r.validate().is_err());
    }

    #[test]
    fn corrupt_line_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        std::fs::write(&path, format!("{}\n{{oops\n", record(0, "a").to_line())).unwrap();
        assert!(matches!(
            Ledger::new(&path).read_all(),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
