//! Track registry: candidates per track and the final system configuration.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::selection::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryCandidate {
    pub model_id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    /// Strategy of the final system (specialist / generalist / ensemble).
    pub strategy: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_details: Option<String>,
    pub candidates: Vec<RegistryCandidate>,
    #[serde(rename = "final", default, skip_serializing_if = "Option::is_none")]
    pub final_config: Option<EnsembleConfig>,
}

impl TrackEntry {
    pub fn baseline(&self) -> Option<&RegistryCandidate> {
        self.candidates.iter().find(|c| c.role == Role::Baseline)
    }

    pub fn role_of(&self, model_id: &str) -> Option<Role> {
        self.candidates
            .iter()
            .find(|c| c.model_id == model_id)
            .map(|c| c.role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub tracks: Vec<TrackEntry>,
}

impl Registry {
    pub fn validate(&self) -> Result<()> {
        let mut codes = BTreeSet::new();
        for t in &self.tracks {
            if !codes.insert(t.code.as_str()) {
                return Err(Error::InvalidRecord(format!("duplicate track `{}`", t.code)));
            }
            let baselines = t
                .candidates
                .iter()
                .filter(|c| c.role == Role::Baseline)
                .count();
            if baselines != 1 {
                return Err(Error::InvalidRecord(format!(
                    "track `{}` has {baselines} baselines, expected exactly one",
                    t.code
                )));
            }
            let mut ids = BTreeSet::new();
            for c in &t.candidates {
                if !ids.insert(c.model_id.as_str()) {
                    return Err(Error::DuplicateModelId(c.model_id.clone()));
                }
            }
            if let Some(cfg) = &t.final_config {
                cfg.validate()?;
            }
        }
        Ok(())
    }

    pub fn track(&self, code: &str) -> Option<&TrackEntry> {
        self.tracks.iter().find(|t| t.code == code)
    }

    pub fn from_json(text: &str, source: &Path) -> Result<Self> {
        let reg: Registry = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("registry serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "tracks": [
    {
      "code": "hau",
      "strategy": "specialist",
      "candidates": [
        {"model_id": "xlm-roberta-base", "role": "baseline"},
        {"model_id": "hausa-xlmr", "role": "specialist"}
      ],
      "final": {"members": [{"model_id": "hausa-xlmr", "weight": 1.0}], "tau": 0.35}
    },
    {
      "code": "mya",
      "strategy": "generalist",
      "candidates": [{"model_id": "xlm-roberta-base", "role": "baseline"}],
      "final": {"members": [{"model_id": "mdeberta-v3-base", "weight": 1.0}]}
    }
  ]
}"#;

    #[test]
    fn parses_and_defaults_tau() {
        let r = Registry::from_json(SAMPLE, Path::new("r.json")).unwrap();
        assert_eq!(r.tracks[0].final_config.as_ref().unwrap().tau, 0.35);
        assert_eq!(r.tracks[1].final_config.as_ref().unwrap().tau, 0.5);
        assert_eq!(r.track("hau").unwrap().role_of("hausa-xlmr"), Some(Role::Specialist));
    }

    #[test]
    fn round_trip_is_stable() {
        let r = Registry::from_json(SAMPLE, Path::new("r.json")).unwrap();
        let text = r.to_json();
        let again = Registry::from_json(&text, Path::new("r.json")).unwrap();
        assert_eq!(again, r);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn baseline_count_enforced() {
        let bad = SAMPLE.replace(r#""role": "specialist""#, r#""role": "baseline""#);
        assert!(Registry::from_json(&bad, Path::new("r.json")).is_err());
        let none = SAMPLE.replace(r#"[{"model_id": "xlm-roberta-base", "role": "baseline"}]"#, "[]");
        assert!(Registry::from_json(&none, Path::new("r.json")).is_err());
    }

    #[test]
    fn duplicate_codes_rejected() {
        let dup = SAMPLE.replace(r#""code": "mya""#, r#""code": "hau""#);
        assert!(Registry::from_json(&dup, Path::new("r.json")).is_err());
    }

    #[test]
    fn syntax_error_names_line() {
        assert!(matches!(
            Registry::from_json("{\n\"tracks\": [,]}", Path::new("r.json")),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
