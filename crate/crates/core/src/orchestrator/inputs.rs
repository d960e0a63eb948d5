//! Text inputs keyed by ticker and date: news articles and quarterly
//! fundamentals.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{source_name}:{line}: {message}")]
    Line { source_name: String, line: usize, message: String },
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R, source: &str) -> Result<Vec<T>, InputError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| InputError::Io { path: source.to_string(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| InputError::Line { source_name: source.to_string(), line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, InputError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| InputError::Io { path: path.display().to_string(), source: e })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewsArticle {
    pub ticker: String,
    pub date: NaiveDate,
    pub text: String,
}

/// Articles per ticker, grouped by publication date in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewsIndex {
    by_ticker: HashMap<String, BTreeMap<NaiveDate, Vec<String>>>,
}

impl NewsIndex {
    pub fn from_articles(articles: impl IntoIterator<Item = NewsArticle>) -> Self {
        let mut by_ticker: HashMap<String, BTreeMap<NaiveDate, Vec<String>>> = HashMap::new();
        for a in articles {
            by_ticker.entry(a.ticker).or_default().entry(a.date).or_default().push(a.text);
        }
        Self { by_ticker }
    }

    pub fn from_jsonl<R: BufRead>(reader: R, source: &str) -> Result<Self, InputError> {
        Ok(Self::from_articles(read_jsonl::<NewsArticle, _>(reader, source)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InputError> {
        let p = path.as_ref();
        Self::from_jsonl(open(p)?, &p.display().to_string())
    }

    /// The articles of the latest publication day on or before `date`, no
    /// more than `lookback_days` calendar days old, joined by blank lines.
    pub fn lookup(&self, ticker: &str, date: NaiveDate, lookback_days: i64) -> Option<(NaiveDate, String)> {
        let days = self.by_ticker.get(ticker)?;
        let (&published, texts) = days.range(..=date).next_back()?;
        ((date - published).num_days() <= lookback_days).then(|| (published, texts.join("\n\n")))
    }

    pub fn article_count(&self) -> usize {
        self.by_ticker.values().flat_map(|d| d.values()).map(Vec::len).sum()
    }
}

/// One quarterly record: a transcript summary and named metrics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalRecord {
    pub ticker: String,
    /// Date the report became public.
    pub date: NaiveDate,
    pub summary: String,
    #[serde(default)]
    pub metrics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FundamentalIndex {
    by_ticker: HashMap<String, BTreeMap<NaiveDate, FundamentalRecord>>,
}

impl FundamentalIndex {
    /// Later records for the same (ticker, date) replace earlier ones.
    pub fn from_records(records: impl IntoIterator<Item = FundamentalRecord>) -> Self {
        let mut by_ticker: HashMap<String, BTreeMap<NaiveDate, FundamentalRecord>> = HashMap::new();
        for r in records {
            by_ticker.entry(r.ticker.clone()).or_default().insert(r.date, r);
        }
        Self { by_ticker }
    }

    pub fn from_jsonl<R: BufRead>(reader: R, source: &str) -> Result<Self, InputError> {
        Ok(Self::from_records(read_jsonl::<FundamentalRecord, _>(reader, source)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InputError> {
        let p = path.as_ref();
        Self::from_jsonl(open(p)?, &p.display().to_string())
    }

    /// Latest record published on or before `date` and at most
    /// `max_age_days` old; it is carried forward through the quarter.
    pub fn lookup(&self, ticker: &str, date: NaiveDate, max_age_days: i64) -> Option<&FundamentalRecord> {
        let (&published, rec) = self.by_ticker.get(ticker)?.range(..=date).next_back()?;
        ((date - published).num_days() <= max_age_days).then_some(rec)
    }

    pub fn record_count(&self) -> usize {
        self.by_ticker.values().map(BTreeMap::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn news_lookback_window() {
        let text = r#"{"ticker":"AAA","date":"2023-01-03","text":"one"}
{"ticker":"AAA","date":"2023-01-03","text":"two"}
{"ticker":"AAA","date":"2023-01-10","text":"three"}"#;
        let idx = NewsIndex::from_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(idx.article_count(), 3);
        assert_eq!(idx.lookup("AAA", d("2023-01-05"), 5), Some((d("2023-01-03"), "one\n\ntwo".into())));
        assert_eq!(idx.lookup("AAA", d("2023-01-09"), 5), None);
        assert_eq!(idx.lookup("AAA", d("2023-01-02"), 5), None);
        assert_eq!(idx.lookup("BBB", d("2023-01-03"), 5), None);
        assert!(NewsIndex::from_jsonl(r#"{"ticker":"A"}"#.as_bytes(), "bad").is_err());
    }

    #[test]
    fn fundamentals_carry_forward() {
        let text = r#"{"ticker":"AAA","date":"2023-02-01","summary":"Q4","metrics":{"EPS Growth":"5.0%"}}
{"ticker":"AAA","date":"2023-05-01","summary":"Q1"}"#;
        let idx = FundamentalIndex::from_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(idx.lookup("AAA", d("2023-04-28"), 120).unwrap().summary, "Q4");
        assert_eq!(idx.lookup("AAA", d("2023-05-01"), 120).unwrap().summary, "Q1");
        assert!(idx.lookup("AAA", d("2023-01-31"), 120).is_none());
        assert!(idx.lookup("AAA", d("2023-12-31"), 120).is_none());
    }
}
