//! Daily OHLCV panels: loading, validation, calendar alignment, chronological
//! splits and movement labels.
//!
//! A panel is immutable once built. Every ticker covers exactly the same
//! trading calendar; a missing day is reported as an error rather than
//! forward-filled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column set expected in panel CSV files.
pub const PANEL_HEADER: [&str; 7] = ["ticker", "date", "open", "high", "low", "close", "volume"];

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("invariant violation for {ticker} on {date}: {rule}")]
    InvariantViolation { ticker: String, date: NaiveDate, rule: String },
    #[error("ticker {ticker} has no bar on {date}")]
    MissingBar { ticker: String, date: NaiveDate },
    #[error("panel is empty")]
    EmptyPanel,
    #[error("split `{0}` contains no trading days")]
    EmptySplit(&'static str),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("unknown ticker {0}")]
    UnknownTicker(String),
    #[error("{0} is not a trading day of the panel")]
    UnknownDate(NaiveDate),
    #[error("horizon of {horizon} days from {date} runs past the end of the calendar")]
    OutOfRange { date: NaiveDate, horizon: usize },
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Returns the first violated rule, if any.
    pub fn check(&self) -> Option<&'static str> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite()) || !self.volume.is_finite() {
            return Some("all fields must be finite");
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return Some("prices must be strictly positive");
        }
        if self.volume < 0.0 {
            return Some("volume must be non-negative");
        }
        if self.high < self.low {
            return Some("high < low");
        }
        if self.low > self.open.min(self.close) {
            return Some("low above min(open, close)");
        }
        if self.high < self.open.max(self.close) {
            return Some("high below max(open, close)");
        }
        None
    }

    /// Typical-price proxy used wherever a VWAP is requested on daily bars.
    pub fn vwap_proxy(&self) -> f64 {
        (self.high + self.low + self.close) / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Open,
    High,
    Low,
    Close,
    Volume,
    Vwap,
}

impl Field {
    pub fn of(self, bar: &OhlcvBar) -> f64 {
        match self {
            Field::Open => bar.open,
            Field::High => bar.high,
            Field::Low => bar.low,
            Field::Close => bar.close,
            Field::Volume => bar.volume,
            Field::Vwap => bar.vwap_proxy(),
        }
    }
}

/// Calendar-aligned bars for a set of tickers.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvPanel {
    tickers: Vec<String>,
    calendar: Vec<NaiveDate>,
    // bars[ticker_idx][day_idx]
    bars: Vec<Vec<OhlcvBar>>,
}

impl OhlcvPanel {
    /// Builds a panel from loose bars, validating every invariant.
    pub fn from_bars(rows: impl IntoIterator<Item = (String, OhlcvBar)>) -> Result<Self> {
        let mut by_ticker: BTreeMap<String, BTreeMap<NaiveDate, OhlcvBar>> = BTreeMap::new();
        for (ticker, bar) in rows {
            if let Some(rule) = bar.check() {
                return Err(MarketError::InvariantViolation {
                    ticker,
                    date: bar.date,
                    rule: rule.to_string(),
                });
            }
            let series = by_ticker.entry(ticker.clone()).or_default();
            if series.insert(bar.date, bar).is_some() {
                return Err(MarketError::MalformedRow {
                    line: 0,
                    reason: format!("duplicate key ({ticker}, {})", bar.date),
                });
            }
        }
        Self::align(by_ticker)
    }

    fn align(by_ticker: BTreeMap<String, BTreeMap<NaiveDate, OhlcvBar>>) -> Result<Self> {
        if by_ticker.is_empty() {
            return Err(MarketError::EmptyPanel);
        }
        let calendar: Vec<NaiveDate> = by_ticker
            .values()
            .flat_map(|s| s.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut tickers = Vec::with_capacity(by_ticker.len());
        let mut bars = Vec::with_capacity(by_ticker.len());
        for (ticker, series) in by_ticker {
            let mut aligned = Vec::with_capacity(calendar.len());
            for date in &calendar {
                match series.get(date) {
                    Some(bar) => aligned.push(*bar),
                    None => {
                        return Err(MarketError::MissingBar { ticker, date: *date });
                    }
                }
            }
            tickers.push(ticker);
            bars.push(aligned);
        }
        Ok(Self { tickers, calendar, bars })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calendar.is_empty()
    }

    pub fn bar_count(&self) -> usize {
        self.tickers.len() * self.calendar.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Result<usize> {
        self.tickers
            .binary_search_by(|t| t.as_str().cmp(ticker))
            .map_err(|_| MarketError::UnknownTicker(ticker.to_string()))
    }

    pub fn date_index(&self, date: NaiveDate) -> Result<usize> {
        self.calendar.binary_search(&date).map_err(|_| MarketError::UnknownDate(date))
    }

    pub fn bars(&self, ticker: &str) -> Result<&[OhlcvBar]> {
        Ok(&self.bars[self.ticker_index(ticker)?])
    }

    pub fn bars_at(&self, ticker_idx: usize) -> &[OhlcvBar] {
        &self.bars[ticker_idx]
    }

    pub fn bar(&self, ticker: &str, date: NaiveDate) -> Result<&OhlcvBar> {
        let t = self.ticker_index(ticker)?;
        let d = self.date_index(date)?;
        Ok(&self.bars[t][d])
    }

    pub fn closes(&self, ticker: &str) -> Result<Vec<f64>> {
        Ok(self.bars(ticker)?.iter().map(|b| b.close).collect())
    }

    /// Restricts the panel to calendar days inside `range` (inclusive).
    pub fn slice_dates(&self, range: &DateRange) -> Option<Self> {
        let lo = self.calendar.partition_point(|d| *d < range.start);
        let hi = self.calendar.partition_point(|d| *d <= range.end);
        if lo >= hi {
            return None;
        }
        Some(Self {
            tickers: self.tickers.clone(),
            calendar: self.calendar[lo..hi].to_vec(),
            bars: self.bars.iter().map(|b| b[lo..hi].to_vec()).collect(),
        })
    }

    /// Restricts the panel to a subset of tickers.
    pub fn select_tickers(&self, keep: &[String]) -> Result<Self> {
        let mut keep: Vec<String> = keep.to_vec();
        keep.sort();
        keep.dedup();
        let bars = keep
            .iter()
            .map(|t| self.ticker_index(t).map(|i| self.bars[i].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tickers: keep, calendar: self.calendar.clone(), bars })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PANEL_HEADER)?;
        for (ticker, series) in self.tickers.iter().zip(&self.bars) {
            for bar in series {
                w.write_record([
                    ticker.clone(),
                    bar.date.format("%Y-%m-%d").to_string(),
                    bar.open.to_string(),
                    bar.high.to_string(),
                    bar.low.to_string(),
                    bar.close.to_string(),
                    bar.volume.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a panel from a CSV file with header `ticker,date,open,high,low,close,volume`.
pub fn load_panel(path: impl AsRef<Path>) -> Result<OhlcvPanel> {
    let file = std::fs::File::open(path)?;
    read_panel(file)
}

pub fn read_panel<R: Read>(input: R) -> Result<OhlcvPanel> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != PANEL_HEADER {
        return Err(MarketError::Header {
            expected: PANEL_HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut by_ticker: BTreeMap<String, BTreeMap<NaiveDate, OhlcvBar>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| MarketError::MalformedRow { line, reason };

        let ticker = record[0].trim();
        if ticker.is_empty() {
            return Err(malformed("empty ticker".into()));
        }
        let date = NaiveDate::parse_from_str(record[1].trim(), "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date `{}`: {e}", &record[1])))?;
        let mut nums = [0.0f64; 5];
        for (slot, (name, raw)) in nums.iter_mut().zip(PANEL_HEADER[2..].iter().zip(record.iter().skip(2))) {
            *slot = raw
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(format!("bad {name} `{raw}`: {e}")))?;
        }
        let bar = OhlcvBar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        };
        if let Some(rule) = bar.check() {
            return Err(MarketError::InvariantViolation {
                ticker: ticker.to_string(),
                date,
                rule: rule.to_string(),
            });
        }
        let series = by_ticker.entry(ticker.to_string()).or_default();
        if series.insert(date, bar).is_some() {
            return Err(malformed(format!("duplicate key ({ticker}, {date})")));
        }
    }
    OhlcvPanel::align(by_ticker)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(MarketError::InvalidSplit(format!("range {start}..{end} is reversed")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

/// Train / validation / test date ranges, strictly ordered and disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: DateRange,
    pub valid: DateRange,
    pub test: DateRange,
}

impl DatasetSplit {
    pub fn new(train: DateRange, valid: DateRange, test: DateRange) -> Result<Self> {
        if train.end >= valid.start {
            return Err(MarketError::InvalidSplit("train must end before valid starts".into()));
        }
        if valid.end >= test.start {
            return Err(MarketError::InvalidSplit("valid must end before test starts".into()));
        }
        Ok(Self { train, valid, test })
    }

    /// Four-year layout: 2020-01-01..2022-06-30 / 2022-07-01..2022-12-31 /
    /// 2023-01-01..2023-12-31.
    pub fn four_year_default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            train: DateRange { start: d(2020, 1, 1), end: d(2022, 6, 30) },
            valid: DateRange { start: d(2022, 7, 1), end: d(2022, 12, 31) },
            test: DateRange { start: d(2023, 1, 1), end: d(2023, 12, 31) },
        }
    }
}

/// Splits a panel into (train, valid, test) by calendar date.
pub fn split_chronological(
    panel: &OhlcvPanel,
    split: &DatasetSplit,
) -> Result<(OhlcvPanel, OhlcvPanel, OhlcvPanel)> {
    let train = panel.slice_dates(&split.train).ok_or(MarketError::EmptySplit("train"))?;
    let valid = panel.slice_dates(&split.valid).ok_or(MarketError::EmptySplit("valid"))?;
    let test = panel.slice_dates(&split.test).ok_or(MarketError::EmptySplit("test"))?;
    Ok((train, valid, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MovementLabel {
    Rise,
    Fall,
}

impl MovementLabel {
    /// Zero or negative change maps to `Fall`.
    pub fn from_change(change: f64) -> Self {
        if change > 0.0 {
            MovementLabel::Rise
        } else {
            MovementLabel::Fall
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MovementLabel::Rise => "Rise",
            MovementLabel::Fall => "Fall",
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            MovementLabel::Rise => 1,
            MovementLabel::Fall => -1,
        }
    }
}

impl fmt::Display for MovementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Rise` iff close(t + horizon) > close(t), counting trading days.
pub fn movement_label(
    panel: &OhlcvPanel,
    ticker: &str,
    date: NaiveDate,
    horizon_days: usize,
) -> Result<MovementLabel> {
    let bars = panel.bars(ticker)?;
    let t = panel.date_index(date)?;
    let target = t + horizon_days;
    if horizon_days == 0 || target >= bars.len() {
        return Err(MarketError::OutOfRange { date, horizon: horizon_days });
    }
    Ok(MovementLabel::from_change(bars[target].close - bars[t].close))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    const GOOD: &str = "ticker,date,open,high,low,close,volume
AAPL,2023-12-01,190.33,191.56,189.23,190.74,45679300
AAPL,2023-12-04,189.98,190.05,187.45,188.93,43389500
AAPL,2023-12-05,190.21,194.40,190.18,192.91,66628400
MSFT,2023-12-01,10,11,9,10.5,100
MSFT,2023-12-04,10.5,11,10,10.8,100
MSFT,2023-12-05,10.8,11.5,10.6,11.2,120
";

    #[test]
    fn loads_well_formed_panel() {
        let panel = read_panel(GOOD.as_bytes()).unwrap();
        assert_eq!(panel.bar_count(), 6);
        assert_eq!(panel.tickers(), ["AAPL", "MSFT"]);
        assert_eq!(panel.calendar(), [d("2023-12-01"), d("2023-12-04"), d("2023-12-05")]);
    }

    #[test]
    fn high_below_low_is_invariant_violation() {
        let csv = "ticker,date,open,high,low,close,volume\nAAPL,2023-12-01,10,9,11,10,1\n";
        match read_panel(csv.as_bytes()) {
            Err(MarketError::InvariantViolation { ticker, rule, .. }) => {
                assert_eq!(ticker, "AAPL");
                assert_eq!(rule, "high < low");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_malformed_row() {
        let csv = "ticker,date,open,high,low,close,volume
AAPL,2023-12-01,10,11,9,10,1
AAPL,2023-12-01,10,11,9,10,1
";
        match read_panel(csv.as_bytes()) {
            Err(MarketError::MalformedRow { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_header_and_bad_numbers() {
        let csv = "ticker,date,open,high,low,close\nAAPL,2023-12-01,1,1,1,1\n";
        assert!(matches!(read_panel(csv.as_bytes()), Err(MarketError::Header { .. })));
        let csv = "ticker,date,open,high,low,close,volume\nAAPL,2023-12-01,x,1,1,1,1\n";
        assert!(matches!(read_panel(csv.as_bytes()), Err(MarketError::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn missing_day_is_an_error() {
        let csv = "ticker,date,open,high,low,close,volume
AAPL,2023-12-01,10,11,9,10,1
AAPL,2023-12-04,10,11,9,10,1
MSFT,2023-12-01,10,11,9,10,1
";
        assert!(matches!(
            read_panel(csv.as_bytes()),
            Err(MarketError::MissingBar { ref ticker, .. }) if ticker == "MSFT"
        ));
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let panel = read_panel(GOOD.as_bytes()).unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        assert_eq!(read_panel(buf.as_slice()).unwrap(), panel);
    }

    #[test]
    fn split_out_of_range_is_empty_split() {
        let panel = read_panel(GOOD.as_bytes()).unwrap();
        let split = DatasetSplit::new(
            DateRange::new(d("2023-11-01"), d("2023-12-01")).unwrap(),
            DateRange::new(d("2023-12-02"), d("2023-12-04")).unwrap(),
            DateRange::new(d("2024-01-01"), d("2024-12-31")).unwrap(),
        )
        .unwrap();
        assert!(matches!(split_chronological(&panel, &split), Err(MarketError::EmptySplit("test"))));
    }

    #[test]
    fn one_day_panel_leaves_later_splits_empty() {
        let csv = "ticker,date,open,high,low,close,volume\nAAPL,2023-12-01,10,11,9,10,1\n";
        let panel = read_panel(csv.as_bytes()).unwrap();
        let split = DatasetSplit::new(
            DateRange::new(d("2023-11-01"), d("2023-12-01")).unwrap(),
            DateRange::new(d("2023-12-02"), d("2023-12-04")).unwrap(),
            DateRange::new(d("2023-12-05"), d("2023-12-31")).unwrap(),
        )
        .unwrap();
        assert_eq!(panel.slice_dates(&split.train).unwrap().len(), 1);
        assert!(matches!(split_chronological(&panel, &split), Err(MarketError::EmptySplit("valid"))));
    }

    #[test]
    fn split_rejects_overlap() {
        let r = DateRange::new(d("2020-01-01"), d("2020-06-30")).unwrap();
        assert!(DatasetSplit::new(r, r, r).is_err());
    }

    #[test]
    fn labels_follow_tie_rule() {
        let csv = "ticker,date,open,high,low,close,volume
X,2023-12-01,100,101,99,100,1
X,2023-12-04,100,102,99,101,1
X,2023-12-05,101,102,100,101,1
";
        let panel = read_panel(csv.as_bytes()).unwrap();
        assert_eq!(movement_label(&panel, "X", d("2023-12-01"), 1).unwrap(), MovementLabel::Rise);
        assert_eq!(movement_label(&panel, "X", d("2023-12-04"), 1).unwrap(), MovementLabel::Fall);
        assert!(matches!(
            movement_label(&panel, "X", d("2023-12-05"), 1),
            Err(MarketError::OutOfRange { .. })
        ));
    }
}
