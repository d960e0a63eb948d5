//! Factor library records and the dates x tickers x factors value cube.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use super::ast::AlphaExpr;
use super::describe::{describe, DescriptionBook};
use super::eval::{evaluate_series, EvalError};
use super::parse::{parse, ParseError};
use crate::market::OhlcvPanel;

pub type AlphaId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRecord {
    pub id: AlphaId,
    pub expression: AlphaExpr,
    pub source_text: String,
    pub description: String,
}

impl AlphaRecord {
    /// Parses `source_text`; an empty description is filled from `book` or the
    /// AST template.
    pub fn new(id: AlphaId, source_text: &str, description: Option<&str>, book: &DescriptionBook) -> Result<Self, ParseError> {
        let expression = parse(source_text)?;
        let mut rec = Self {
            id,
            expression,
            source_text: source_text.trim().to_string(),
            description: String::new(),
        };
        rec.description = match description.map(str::trim) {
            Some(d) if !d.is_empty() => d.to_string(),
            _ => describe(&rec, book),
        };
        Ok(rec)
    }
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("duplicate alpha id {0}")]
    DuplicateId(AlphaId),
    #[error("empty factor library")]
    Empty,
}

/// Reads `id<TAB>expression[<TAB>description]` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_library(text: &str, book: &DescriptionBook) -> Result<Vec<AlphaRecord>, LibraryError> {
    let mut out: Vec<AlphaRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = raw.split('\t');
        let id_text = cols.next().unwrap_or_default().trim();
        let id: AlphaId = id_text
            .parse()
            .map_err(|_| LibraryError::Line { line, reason: format!("bad id `{id_text}`") })?;
        let expr = cols
            .next()
            .ok_or_else(|| LibraryError::Line { line, reason: "missing expression column".into() })?;
        let desc = cols.next();
        if cols.next().is_some() {
            return Err(LibraryError::Line { line, reason: "too many columns".into() });
        }
        if out.iter().any(|r| r.id == id) {
            return Err(LibraryError::DuplicateId(id));
        }
        let rec = AlphaRecord::new(id, expr, desc, book).map_err(|source| LibraryError::Parse { line, source })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(LibraryError::Empty);
    }
    Ok(out)
}

pub fn load_library(path: impl AsRef<Path>, book: &DescriptionBook) -> Result<Vec<AlphaRecord>, LibraryError> {
    parse_library(&std::fs::read_to_string(path)?, book)
}

/// Factor values indexed by (date, ticker, factor). Warm-up cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub alpha_ids: Vec<AlphaId>,
    values: Vec<f64>,
}

impl FactorMatrix {
    #[inline]
    pub fn get(&self, date_idx: usize, ticker_idx: usize, factor_idx: usize) -> f64 {
        let nt = self.tickers.len();
        let nf = self.alpha_ids.len();
        self.values[(date_idx * nt + ticker_idx) * nf + factor_idx]
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Cross-section of every factor on one date.
    pub fn slice(&self, date: NaiveDate) -> Option<FactorSlice> {
        let d = self.date_index(date)?;
        let nt = self.tickers.len();
        let nf = self.alpha_ids.len();
        Some(FactorSlice {
            date,
            tickers: self.tickers.clone(),
            alpha_ids: self.alpha_ids.clone(),
            values: self.values[d * nt * nf..(d + 1) * nt * nf].to_vec(),
        })
    }

    /// Long-form CSV: `date,ticker,alpha_id,value`. NaN cells are written as `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "ticker", "alpha_id", "value"])?;
        for (d, date) in self.dates.iter().enumerate() {
            let ds = date.format("%Y-%m-%d").to_string();
            for (t, ticker) in self.tickers.iter().enumerate() {
                for (f, id) in self.alpha_ids.iter().enumerate() {
                    w.write_record([ds.as_str(), ticker, &id.to_string(), &self.get(d, t, f).to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One date of a [`FactorMatrix`]; `values` is ticker-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSlice {
    pub date: NaiveDate,
    pub tickers: Vec<String>,
    pub alpha_ids: Vec<AlphaId>,
    pub values: Vec<f64>,
}

impl FactorSlice {
    #[inline]
    pub fn get(&self, ticker_idx: usize, factor_idx: usize) -> f64 {
        self.values[ticker_idx * self.alpha_ids.len() + factor_idx]
    }
}

/// Evaluates every factor over the panel and keeps the requested dates.
///
/// Fails with `InsufficientHistory` when the panel is shorter than a factor's
/// lookback; requested dates that fall inside a factor's warm-up are NaN.
pub fn build_factor_matrix(
    library: &[AlphaRecord],
    panel: &OhlcvPanel,
    dates: &[NaiveDate],
) -> Result<FactorMatrix, EvalError> {
    for rec in library {
        let needed = rec.expression.lookback();
        if panel.len() < needed {
            return Err(EvalError::InsufficientHistory { needed, available: panel.len() });
        }
    }
    let day_idx = dates.iter().map(|d| panel.date_index(*d)).collect::<Result<Vec<_>, _>>()?;

    // evaluation order does not affect the values; collect keeps library order
    let grids: Vec<_> = library.par_iter().map(|r| evaluate_series(&r.expression, panel)).collect();

    let nt = panel.tickers().len();
    let nf = library.len();
    let mut values = vec![f64::NAN; dates.len() * nt * nf];
    for (di, &d) in day_idx.iter().enumerate() {
        for t in 0..nt {
            for (f, g) in grids.iter().enumerate() {
                values[(di * nt + t) * nf + f] = g.get(d, t);
            }
        }
    }
    Ok(FactorMatrix {
        dates: dates.to_vec(),
        tickers: panel.tickers().to_vec(),
        alpha_ids: library.iter().map(|r| r.id).collect(),
        values,
    })
}
