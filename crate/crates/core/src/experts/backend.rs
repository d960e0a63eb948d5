//! The backend contract and the replaying backend.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use super::prompt::PromptBundle;
use super::ExpertKind;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no scripted response for {kind} {ticker} {date}")]
    MissingScript { kind: ExpertKind, ticker: String, date: String },
    #[error("backend cannot answer: {0}")]
    Unsupported(String),
    #[error("backend setup failed: {0}")]
    Setup(String),
}

/// Something that answers prompt bundles with raw text.
///
/// Implementations must tolerate concurrent calls. A backend reporting
/// `is_deterministic() == true` must return identical text for identical
/// bundles.
pub trait ExpertBackend: Send + Sync {
    fn answer(&self, bundle: &PromptBundle) -> Result<String, BackendError>;
    fn identity(&self) -> String;
    fn is_deterministic(&self) -> bool;
}

/// One line of a scripted response file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedResponse {
    pub kind: ExpertKind,
    /// `A|B` for comparisons.
    pub ticker: String,
    pub date: NaiveDate,
    pub response: String,
}

/// Replays recorded responses keyed by (expert kind, ticker, date).
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: HashMap<(ExpertKind, String, NaiveDate), String>,
    source: String,
}

impl ScriptedBackend {
    pub fn from_records(records: impl IntoIterator<Item = ScriptedResponse>, source: &str) -> Result<Self, BackendError> {
        let mut responses = HashMap::new();
        for r in records {
            let key = (r.kind, r.ticker, r.date);
            if responses.contains_key(&key) {
                return Err(BackendError::Setup(format!("duplicate script entry {} {} {}", key.0, key.1, key.2)));
            }
            responses.insert(key, r.response);
        }
        Ok(Self { responses, source: source.to_string() })
    }

    pub fn from_jsonl<R: BufRead>(reader: R, source: &str) -> Result<Self, BackendError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| BackendError::Setup(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line).map_err(|e| BackendError::Setup(format!("{source}:{}: {e}", i + 1)))?,
            );
        }
        Self::from_records(records, source)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let p = path.as_ref();
        let f = std::fs::File::open(p).map_err(|e| BackendError::Setup(format!("{}: {e}", p.display())))?;
        Self::from_jsonl(std::io::BufReader::new(f), &p.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ExpertBackend for ScriptedBackend {
    fn answer(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let missing = || BackendError::MissingScript {
            kind: bundle.kind,
            ticker: bundle.ticker.clone(),
            date: bundle.date.map(|d| d.to_string()).unwrap_or_default(),
        };
        let date = bundle.date.ok_or_else(missing)?;
        self.responses.get(&(bundle.kind, bundle.ticker.clone(), date)).cloned().ok_or_else(missing)
    }

    fn identity(&self) -> String {
        format!("scripted:{}", self.source)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::prompt::build_news_prompt;

    #[test]
    fn replays_by_key() {
        let text = r#"{"kind":"news","ticker":"AAA","date":"2023-01-03","response":"Prediction: Rise"}
{"kind":"general_compare","ticker":"AAA|BBB","date":"2023-01-03","response":"Stock BBB"}"#;
        let b = ScriptedBackend::from_jsonl(text.as_bytes(), "mem").unwrap();
        let d = NaiveDate::from_ymd_opt(2023, 1, 3).unwrap();
        let bundle = build_news_prompt("x", 1).unwrap().with_subject("AAA", d);
        assert_eq!(b.answer(&bundle).unwrap(), "Prediction: Rise");
        let other = build_news_prompt("x", 1).unwrap().with_subject("CCC", d);
        assert!(matches!(b.answer(&other), Err(BackendError::MissingScript { .. })));
        assert!(ScriptedBackend::from_jsonl(format!("{text}\n{text}").as_bytes(), "dup").is_err());
    }
}
