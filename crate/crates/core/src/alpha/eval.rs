//! Vectorised evaluation of factor expressions over a panel.
//!
//! Every node produces a `days x tickers` grid for the whole calendar it is
//! given. Warm-up cells (not enough history yet) and invalid arithmetic
//! (zero denominators, log of non-positive values) are NaN; NaN propagates
//! through arithmetic and time-series windows, and is skipped by the
//! cross-sectional rank.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use thiserror::Error;

use super::ast::{AlphaExpr, BinaryOp, FieldRef, TsKind, UnaryOp};
use crate::market::{DateRange, MarketError, OhlcvPanel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("insufficient history: need {needed} trading days, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Row-major `days x tickers` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub days: usize,
    pub tickers: usize,
    pub data: Vec<f64>,
}

impl Grid {
    fn filled(days: usize, tickers: usize, v: f64) -> Self {
        Self { days, tickers, data: vec![v; days * tickers] }
    }

    #[inline]
    pub fn get(&self, day: usize, ticker: usize) -> f64 {
        self.data[day * self.tickers + ticker]
    }

    #[inline]
    fn set(&mut self, day: usize, ticker: usize, v: f64) {
        self.data[day * self.tickers + ticker] = v;
    }

    pub fn row(&self, day: usize) -> &[f64] {
        &self.data[day * self.tickers..(day + 1) * self.tickers]
    }

    fn column(&self, ticker: usize) -> Vec<f64> {
        (0..self.days).map(|d| self.get(d, ticker)).collect()
    }
}

/// Evaluates `expr` over every day of the panel.
pub fn evaluate_series(expr: &AlphaExpr, panel: &OhlcvPanel) -> Grid {
    let days = panel.len();
    let n = panel.tickers().len();
    match expr {
        AlphaExpr::Literal(v) => Grid::filled(days, n, *v),
        AlphaExpr::Field(FieldRef::Adv(w)) => {
            let mut vol = Grid::filled(days, n, f64::NAN);
            for t in 0..n {
                for (d, bar) in panel.bars_at(t).iter().enumerate() {
                    vol.set(d, t, bar.volume);
                }
            }
            rolling(&vol, *w, |win| mean(win))
        }
        AlphaExpr::Field(f) => {
            let field = f.bar_field().expect("non-adv field");
            let mut g = Grid::filled(days, n, f64::NAN);
            for t in 0..n {
                for (d, bar) in panel.bars_at(t).iter().enumerate() {
                    g.set(d, t, field.of(bar));
                }
            }
            g
        }
        AlphaExpr::Unary(op, e) => {
            let mut g = evaluate_series(e, panel);
            for v in &mut g.data {
                *v = apply_unary(*op, *v);
            }
            g
        }
        AlphaExpr::Binary(op, l, r) => {
            let mut a = evaluate_series(l, panel);
            let b = evaluate_series(r, panel);
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x = apply_binary(*op, *x, *y);
            }
            a
        }
        AlphaExpr::Rank(e) => {
            let g = evaluate_series(e, panel);
            let mut out = Grid::filled(days, n, f64::NAN);
            for d in 0..days {
                let ranks = cross_sectional_rank(g.row(d));
                out.data[d * n..(d + 1) * n].copy_from_slice(&ranks);
            }
            out
        }
        AlphaExpr::Ts { kind, expr, window } => {
            let g = evaluate_series(expr, panel);
            let w = *window;
            match kind {
                TsKind::Delta => rolling(&g, w + 1, |win| win[w] - win[0]),
                TsKind::Min => rolling(&g, w, |win| win.iter().copied().fold(f64::INFINITY, f64::min)),
                TsKind::Max => rolling(&g, w, |win| win.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                TsKind::Rank => rolling(&g, w, ts_rank),
                TsKind::ArgMax => rolling(&g, w, |win| arg_extreme(win, |a, b| a > b)),
                TsKind::ArgMin => rolling(&g, w, |win| arg_extreme(win, |a, b| a < b)),
                TsKind::Stddev => rolling(&g, w, sample_std),
                TsKind::Sum => rolling(&g, w, |win| win.iter().sum()),
                TsKind::Mean => rolling(&g, w, mean),
                TsKind::DecayLinear => rolling(&g, w, decay_linear),
            }
        }
        AlphaExpr::Corr { left, right, window } => {
            let a = evaluate_series(left, panel);
            let b = evaluate_series(right, panel);
            let w = *window;
            let mut out = Grid::filled(days, n, f64::NAN);
            for t in 0..n {
                let xa = a.column(t);
                let xb = b.column(t);
                for d in (w.saturating_sub(1))..days {
                    let lo = d + 1 - w;
                    out.set(d, t, pearson(&xa[lo..=d], &xb[lo..=d]));
                }
            }
            out
        }
    }
}

/// Applies `f` to each trailing window of `len` values; windows containing
/// NaN produce NaN.
fn rolling(g: &Grid, len: usize, f: impl Fn(&[f64]) -> f64) -> Grid {
    let mut out = Grid::filled(g.days, g.tickers, f64::NAN);
    for t in 0..g.tickers {
        let col = g.column(t);
        for d in (len.saturating_sub(1))..g.days {
            let win = &col[d + 1 - len..=d];
            if win.iter().any(|v| v.is_nan()) {
                continue;
            }
            out.set(d, t, f(win));
        }
    }
    out
}

pub(crate) fn apply_unary(op: UnaryOp, v: f64) -> f64 {
    match op {
        UnaryOp::Neg => -v,
        UnaryOp::Abs => v.abs(),
        UnaryOp::Log => {
            if v > 0.0 {
                v.ln()
            } else {
                f64::NAN
            }
        }
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                f64::NAN
            } else {
                a / b
            }
        }
    }
}

fn mean(win: &[f64]) -> f64 {
    win.iter().sum::<f64>() / win.len() as f64
}

fn sample_std(win: &[f64]) -> f64 {
    if is_constant(win) {
        return 0.0;
    }
    let m = mean(win);
    let ss: f64 = win.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (win.len() - 1) as f64).sqrt()
}

fn is_constant(win: &[f64]) -> bool {
    win.iter().all(|v| *v == win[0])
}

/// Percentile rank of the newest value inside its window, average ranks on ties.
fn ts_rank(win: &[f64]) -> f64 {
    let last = win[win.len() - 1];
    let below = win.iter().filter(|v| **v < last).count() as f64;
    let equal = win.iter().filter(|v| **v == last).count() as f64;
    (below + (equal + 1.0) / 2.0) / win.len() as f64
}

/// Offset from the window start of the first extreme value.
fn arg_extreme(win: &[f64], better: impl Fn(f64, f64) -> bool) -> f64 {
    let mut best = 0;
    for (i, v) in win.iter().enumerate().skip(1) {
        if better(*v, win[best]) {
            best = i;
        }
    }
    best as f64
}

fn decay_linear(win: &[f64]) -> f64 {
    let w = win.len();
    let norm = (w * (w + 1) / 2) as f64;
    // oldest value gets weight 1, newest gets weight w
    win.iter().enumerate().map(|(i, v)| v * (i + 1) as f64).sum::<f64>() / norm
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a.iter().chain(b).any(|v| v.is_nan()) || is_constant(a) || is_constant(b) {
        return f64::NAN;
    }
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Cross-sectional percentile rank in (0, 1] with average ranks for ties.
/// NaN entries are dropped from the cross-section and stay NaN.
pub fn cross_sectional_rank(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
    let valid = idx.len();
    let mut out = vec![f64::NAN; values.len()];
    if valid == 0 {
        return out;
    }
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut start = 0;
    while start < valid {
        let mut end = start + 1;
        while end < valid && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // 1-based positions start+1 ..= end share their average
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = avg / valid as f64;
        }
        start = end;
    }
    out
}

/// Evaluates `expr` cross-sectionally on `date`.
pub fn evaluate(expr: &AlphaExpr, panel: &OhlcvPanel, date: NaiveDate) -> Result<BTreeMap<String, f64>, EvalError> {
    let t = panel.date_index(date)?;
    let needed = expr.lookback();
    if t + 1 < needed {
        return Err(EvalError::InsufficientHistory { needed, available: t + 1 });
    }
    let window = DateRange { start: panel.calendar()[t + 1 - needed], end: date };
    let sub = panel.slice_dates(&window).expect("window is inside the calendar");
    let g = evaluate_series(expr, &sub);
    let last = g.row(g.days - 1);
    Ok(panel.tickers().iter().cloned().zip(last.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::parse;
    use crate::market::{OhlcvBar, OhlcvPanel};

    fn panel_from_closes(series: &[(&str, &[f64])]) -> OhlcvPanel {
        let start = NaiveDate::from_ymd_opt(2023, 1, 2).unwrap();
        let rows = series.iter().flat_map(|(t, closes)| {
            closes.iter().enumerate().map(move |(i, c)| {
                (
                    t.to_string(),
                    OhlcvBar {
                        date: start + chrono::Days::new(i as u64),
                        open: *c,
                        high: *c,
                        low: *c,
                        close: *c,
                        volume: 100.0 + i as f64,
                    },
                )
            })
        });
        OhlcvPanel::from_bars(rows).unwrap()
    }

    #[test]
    fn ts_min_over_three_days() {
        let p = panel_from_closes(&[("A", &[5.0, 3.0, 4.0])]);
        let v = evaluate(&parse("ts_min(close, 3)").unwrap(), &p, p.calendar()[2]).unwrap();
        assert_eq!(v["A"], 3.0);
    }

    #[test]
    fn rank_uses_average_percentiles() {
        assert_eq!(cross_sectional_rank(&[10.0, 20.0, 30.0]), vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(cross_sectional_rank(&[5.0, 5.0, 1.0]), vec![2.5 / 3.0, 2.5 / 3.0, 1.0 / 3.0]);
        let r = cross_sectional_rank(&[f64::NAN, 2.0, 1.0]);
        assert!(r[0].is_nan());
        assert_eq!(&r[1..], &[1.0, 0.5]);
    }

    #[test]
    fn insufficient_history() {
        let p = panel_from_closes(&[("A", &[1.0, 2.0, 3.0])]);
        let e = parse("ts_max(close, 5)").unwrap();
        assert!(matches!(
            evaluate(&e, &p, p.calendar()[2]),
            Err(EvalError::InsufficientHistory { needed: 5, available: 3 })
        ));
    }

    #[test]
    fn division_by_zero_is_nan() {
        let p = panel_from_closes(&[("A", &[1.0, 1.0]), ("B", &[2.0, 3.0])]);
        let v = evaluate(&parse("close / delta(close, 1)").unwrap(), &p, p.calendar()[1]).unwrap();
        assert!(v["A"].is_nan());
        assert_eq!(v["B"], 3.0);
    }

    #[test]
    fn window_operators() {
        let p = panel_from_closes(&[("A", &[1.0, 4.0, 2.0, 4.0])]);
        let last = p.calendar()[3];
        let at = |s: &str| evaluate(&parse(s).unwrap(), &p, last).unwrap()["A"];
        assert_eq!(at("ts_argmax(close, 4)"), 1.0);
        assert_eq!(at("ts_argmin(close, 3)"), 1.0);
        assert_eq!(at("ts_rank(close, 4)"), 3.5 / 4.0);
        assert_eq!(at("delta(close, 3)"), 3.0);
        assert_eq!(at("sum(close, 2)"), 6.0);
        assert_eq!(at("decay_linear(close, 3)"), (4.0 + 2.0 * 2.0 + 3.0 * 4.0) / 6.0);
        assert!((at("stddev(close, 2)") - 2f64.sqrt()).abs() < 1e-12);
        assert!(at("corr(close, close, 3)") > 0.999_999);
        let flat = panel_from_closes(&[("A", &[2.0, 2.0, 2.0])]);
        let v = evaluate(&parse("corr(close, volume, 3)").unwrap(), &flat, flat.calendar()[2]).unwrap();
        assert!(v["A"].is_nan());
    }

    #[test]
    fn lookback_matches_first_valid_day() {
        let closes: Vec<f64> = (0..40).map(|i| 10.0 + (i as f64 * 0.7).sin()).collect();
        let p = panel_from_closes(&[("A", &closes), ("B", &closes.iter().map(|c| c * 1.1).collect::<Vec<_>>())]);
        for src in [
            "rank(ts_argmax(corr(ts_rank(close, 10), ts_rank(open * close, 10), 10), 5))",
            "delta(ts_mean(close, 3), 2)",
            "adv(7) / volume",
        ] {
            let e = parse(src).unwrap();
            let g = evaluate_series(&e, &p);
            let first_valid = (0..g.days).find(|d| !g.get(*d, 0).is_nan()).unwrap();
            assert_eq!(first_valid + 1, e.lookback(), "{src}");
        }
    }
}
