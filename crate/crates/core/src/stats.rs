//! Close-price statistics for the market analyst prompt.

use std::fmt;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("window too short: need at least 2 closes, have {0}")]
    WindowTooShort(usize),
    #[error("as-of index {asof} outside window of {len}")]
    AsOfOutOfRange { asof: usize, len: usize },
    #[error("non-finite close at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Upward,
    Downward,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Upward => "upward",
            Trend::Downward => "downward",
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A close value and how many trading days before the as-of day it occurred.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PricePoint {
    pub value: f64,
    pub days_ago: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StatsSummary {
    pub min_close: PricePoint,
    pub max_close: PricePoint,
    pub median_close: PricePoint,
    pub trend: Trend,
    pub window_len: usize,
}

/// Statistics over `closes[..=asof_index]`; later entries are ignored so the
/// summary never looks past the as-of day.
///
/// Ties in min, max and median resolve to the most recent bar. The median is
/// the lower median. The trend is upward iff the least-squares slope of close
/// against day index is non-negative.
pub fn summarize(closes: &[f64], asof_index: usize) -> Result<StatsSummary, StatsError> {
    if asof_index >= closes.len() {
        return Err(StatsError::AsOfOutOfRange { asof: asof_index, len: closes.len() });
    }
    let w = &closes[..=asof_index];
    if w.len() < 2 {
        return Err(StatsError::WindowTooShort(w.len()));
    }
    if let Some(i) = w.iter().position(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let point = |i: usize| PricePoint { value: w[i], days_ago: asof_index - i };

    let mut lo = 0;
    let mut hi = 0;
    for (i, &x) in w.iter().enumerate() {
        if x <= w[lo] {
            lo = i;
        }
        if x >= w[hi] {
            hi = i;
        }
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(w.len() - 1) / 2];
    let med_idx = w.iter().rposition(|x| *x == median).expect("median is a window value");

    Ok(StatsSummary {
        min_close: point(lo),
        max_close: point(hi),
        median_close: point(med_idx),
        trend: if ls_slope(w) >= 0.0 { Trend::Upward } else { Trend::Downward },
        window_len: w.len(),
    })
}

fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Fills the statistics sentence of the market analyst prompt.
pub fn render_text(s: &StatsSummary) -> String {
    format!(
        "The historical prices have a minimum close of ${:.2} {} days ago, a maximum close of ${:.2} {} days ago, \
         and a median close of ${:.2} {} days ago. The overall trend is {}...",
        s.min_close.value,
        s.min_close.days_ago,
        s.max_close.value,
        s.max_close.days_ago,
        s.median_close.value,
        s.median_close.days_ago,
        s.trend
    )
}

/// Numeric fields recovered from [`render_text`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedStats {
    pub min: (f64, usize),
    pub max: (f64, usize),
    pub median: (f64, usize),
    pub trend: Trend,
}

pub fn rendered_pattern() -> Regex {
    Regex::new(
        r"^The historical prices have a minimum close of \$(-?\d+\.\d{2}) (\d+) days ago, a maximum close of \$(-?\d+\.\d{2}) (\d+) days ago, and a median close of \$(-?\d+\.\d{2}) (\d+) days ago\. The overall trend is (upward|downward)\.\.\.$",
    )
    .expect("valid regex")
}

pub fn parse_rendered(text: &str) -> Option<RenderedStats> {
    let c = rendered_pattern().captures(text)?;
    let num = |i: usize| c[i].parse::<f64>().ok();
    let days = |i: usize| c[i].parse::<usize>().ok();
    Some(RenderedStats {
        min: (num(1)?, days(2)?),
        max: (num(3)?, days(4)?),
        median: (num(5)?, days(6)?),
        trend: if &c[7] == "upward" { Trend::Upward } else { Trend::Downward },
    })
}
