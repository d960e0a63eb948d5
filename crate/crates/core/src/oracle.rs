//! Slow, straight-line reference implementations.
//!
//! Each function recomputes a library result from its definition without
//! sharing code with the module it checks. The test suites, the acceptance
//! harness and `selftest` compare the two.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use ndarray::{Array3, Array4};
use rand::Rng;

use crate::alpha::{AlphaExpr, BinaryOp, FieldRef, TsKind, UnaryOp, CORR_MIN_WINDOW};
use crate::market::{MarketError, OhlcvBar, OhlcvPanel};
use crate::reprogram::{PrototypeBank, Reprogrammer};
use crate::stats::{PricePoint, StatsSummary, Trend};

/// `|a - b| <= tol * max(1, |a|, |b|)`; NaNs match NaNs and infinities
/// match themselves.
pub fn close_enough(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

// ---- alpha expressions ----

fn field_value(panel: &OhlcvPanel, t: usize, day: usize, f: FieldRef) -> f64 {
    let bar = &panel.bars_at(t)[day];
    match f {
        FieldRef::Open => bar.open,
        FieldRef::High => bar.high,
        FieldRef::Low => bar.low,
        FieldRef::Close => bar.close,
        FieldRef::Volume => bar.volume,
        FieldRef::Vwap => (bar.high + bar.low + bar.close) / 3.0,
        FieldRef::Adv(n) => {
            if day + 1 < n {
                return f64::NAN;
            }
            let mut s = 0.0;
            for k in day + 1 - n..=day {
                s += panel.bars_at(t)[k].volume;
            }
            s / n as f64
        }
    }
}

/// The `w` values ending at `day`, oldest first, or `None` if the history is
/// too short or any value is NaN.
fn history(expr: &AlphaExpr, panel: &OhlcvPanel, t: usize, day: usize, w: usize) -> Option<Vec<f64>> {
    if day + 1 < w {
        return None;
    }
    let mut out = Vec::with_capacity(w);
    for k in day + 1 - w..=day {
        let v = naive_value(expr, panel, t, k);
        if v.is_nan() {
            return None;
        }
        out.push(v);
    }
    Some(out)
}

fn all_same(xs: &[f64]) -> bool {
    xs.iter().all(|x| *x == xs[0])
}

fn avg(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

/// Value of `expr` for ticker index `t` on calendar index `day`, computed
/// recursively from raw bars.
pub fn naive_value(expr: &AlphaExpr, panel: &OhlcvPanel, t: usize, day: usize) -> f64 {
    match expr {
        AlphaExpr::Literal(v) => *v,
        AlphaExpr::Field(f) => field_value(panel, t, day, *f),
        AlphaExpr::Unary(op, e) => {
            let v = naive_value(e, panel, t, day);
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Abs => v.abs(),
                UnaryOp::Log if v > 0.0 => v.ln(),
                UnaryOp::Log => f64::NAN,
            }
        }
        AlphaExpr::Binary(op, l, r) => {
            let a = naive_value(l, panel, t, day);
            let b = naive_value(r, panel, t, day);
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b == 0.0 => f64::NAN,
                BinaryOp::Div => a / b,
            }
        }
        AlphaExpr::Rank(e) => {
            let me = naive_value(e, panel, t, day);
            if me.is_nan() {
                return f64::NAN;
            }
            let others: Vec<f64> = (0..panel.tickers().len())
                .map(|u| naive_value(e, panel, u, day))
                .filter(|v| !v.is_nan())
                .collect();
            let below = others.iter().filter(|v| **v < me).count() as f64;
            let equal = others.iter().filter(|v| **v == me).count() as f64;
            // average of the 1-based positions below+1 ..= below+equal
            (below + (equal + 1.0) / 2.0) / others.len() as f64
        }
        AlphaExpr::Ts { kind, expr, window } => {
            let w = *window;
            let len = if *kind == TsKind::Delta { w + 1 } else { w };
            let Some(h) = history(expr, panel, t, day, len) else {
                return f64::NAN;
            };
            let last = h[h.len() - 1];
            match kind {
                TsKind::Delta => last - h[0],
                TsKind::Min => h.iter().copied().fold(f64::INFINITY, f64::min),
                TsKind::Max => h.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                TsKind::Rank => {
                    let below = h.iter().filter(|v| **v < last).count() as f64;
                    let equal = h.iter().filter(|v| **v == last).count() as f64;
                    (below + (equal + 1.0) / 2.0) / w as f64
                }
                TsKind::ArgMax | TsKind::ArgMin => {
                    let target = if *kind == TsKind::ArgMax {
                        h.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        h.iter().copied().fold(f64::INFINITY, f64::min)
                    };
                    h.iter().position(|v| *v == target).unwrap_or(0) as f64
                }
                TsKind::Stddev => {
                    if all_same(&h) {
                        return 0.0;
                    }
                    let m = avg(&h);
                    let mut ss = 0.0;
                    for v in &h {
                        ss += (v - m) * (v - m);
                    }
                    (ss / (w - 1) as f64).sqrt()
                }
                TsKind::Sum => {
                    let mut s = 0.0;
                    for v in &h {
                        s += v;
                    }
                    s
                }
                TsKind::Mean => avg(&h),
                TsKind::DecayLinear => {
                    let mut num = 0.0;
                    for (i, v) in h.iter().enumerate() {
                        num += v * (i + 1) as f64;
                    }
                    num / (w * (w + 1) / 2) as f64
                }
            }
        }
        AlphaExpr::Corr { left, right, window } => {
            let (Some(a), Some(b)) = (history(left, panel, t, day, *window), history(right, panel, t, day, *window))
            else {
                return f64::NAN;
            };
            if all_same(&a) || all_same(&b) {
                return f64::NAN;
            }
            let (ma, mb) = (avg(&a), avg(&b));
            let mut sab = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            for i in 0..a.len() {
                sab += (a[i] - ma) * (b[i] - mb);
                saa += (a[i] - ma) * (a[i] - ma);
                sbb += (b[i] - mb) * (b[i] - mb);
            }
            if saa == 0.0 || sbb == 0.0 {
                return f64::NAN;
            }
            (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
        }
    }
}

/// Cross-section of `expr` on `date` by direct recursion.
pub fn naive_alpha(expr: &AlphaExpr, panel: &OhlcvPanel, date: NaiveDate) -> Result<BTreeMap<String, f64>, MarketError> {
    let day = panel.date_index(date)?;
    Ok(panel.tickers().iter().enumerate().map(|(t, name)| (name.clone(), naive_value(expr, panel, t, day))).collect())
}

/// Random well-formed expression with operator depth at most `max_depth`
/// and windows of at most `max_window`.
pub fn random_expr(rng: &mut impl Rng, max_depth: usize, max_window: usize) -> AlphaExpr {
    let max_window = max_window.max(CORR_MIN_WINDOW);
    if max_depth == 0 || rng.random::<f64>() < 0.2 {
        return match rng.random_range(0..9) {
            0 => AlphaExpr::Literal([0.5, 1.0, 2.0, 3.0, -1.0][rng.random_range(0..5)]),
            1 => AlphaExpr::Field(FieldRef::Adv(rng.random_range(2..=max_window))),
            2 => AlphaExpr::Field(FieldRef::Open),
            3 => AlphaExpr::Field(FieldRef::High),
            4 => AlphaExpr::Field(FieldRef::Low),
            5 | 6 => AlphaExpr::Field(FieldRef::Close),
            7 => AlphaExpr::Field(FieldRef::Volume),
            _ => AlphaExpr::Field(FieldRef::Vwap),
        };
    }
    let sub = |rng: &mut _| random_expr(rng, max_depth - 1, max_window);
    match rng.random_range(0..6) {
        0 => {
            let op = [UnaryOp::Neg, UnaryOp::Abs, UnaryOp::Log][rng.random_range(0..3)];
            AlphaExpr::unary(op, sub(rng))
        }
        1 => {
            let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div][rng.random_range(0..4)];
            AlphaExpr::binary(op, sub(rng), sub(rng))
        }
        2 => AlphaExpr::rank(sub(rng)),
        3 | 4 => {
            let kind = TsKind::ALL[rng.random_range(0..TsKind::ALL.len())];
            let w = rng.random_range(kind.min_window()..=max_window);
            AlphaExpr::ts(kind, sub(rng), w)
        }
        _ => {
            let w = rng.random_range(CORR_MIN_WINDOW..=max_window);
            AlphaExpr::corr(sub(rng), sub(rng), w)
        }
    }
}

/// Small random panel with cent-rounded prices (so ties occur) and integer
/// volumes.
pub fn random_panel(rng: &mut impl Rng, tickers: usize, days: usize) -> OhlcvPanel {
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).expect("date");
    let mut rows = Vec::new();
    for t in 0..tickers {
        let mut price: f64 = rng.random_range(5.0..50.0);
        for d in 0..days {
            let open = (price * 100.0).round() / 100.0;
            price *= 1.0 + rng.random_range(-0.03..0.03);
            let close = (price.max(0.5) * 100.0).round() / 100.0;
            let high = open.max(close) + (rng.random_range(0..30) as f64) / 100.0;
            let low = (open.min(close) - (rng.random_range(0..30) as f64) / 100.0).max(0.01);
            let volume = rng.random_range(1..20) as f64 * 1000.0;
            rows.push((format!("R{t}"), OhlcvBar { date: start + Days::new(d as u64), open, high, low, close, volume }));
        }
    }
    OhlcvPanel::from_bars(rows).expect("valid random panel")
}

// ---- reprogramming ----

/// Cross-attention with explicit loops. Returns `(output, attention)` in the
/// same layouts as the library.
pub fn naive_attention(rp: &Reprogrammer, patches: &Array3<f64>, bank: &PrototypeBank) -> (Array3<f64>, Array4<f64>) {
    let cfg = &rp.cfg;
    let w = &rp.weights;
    let (n, lp, dm) = patches.dim();
    let vp = bank.e_prime.nrows();
    let de = bank.e_prime.ncols();
    let mut attention = Array4::zeros((cfg.heads, n, lp, vp));
    let mut output = Array3::zeros((n, lp, cfg.d_llm));
    for i in 0..n {
        for p in 0..lp {
            let mut z = vec![0.0; dm];
            for h in 0..cfg.heads {
                let cols: Vec<usize> = (h * cfg.d_k..(h + 1) * cfg.d_k).collect();
                let q: Vec<f64> = cols.iter().map(|&c| (0..dm).map(|k| patches[[i, p, k]] * w.w_q[[k, c]]).sum()).collect();
                let mut scores = vec![0.0; vp];
                for (v, s) in scores.iter_mut().enumerate() {
                    let mut dot = 0.0;
                    for (qi, &c) in cols.iter().enumerate() {
                        let key: f64 = (0..de).map(|e| bank.e_prime[[v, e]] * w.w_k[[e, c]]).sum();
                        dot += q[qi] * key;
                    }
                    *s = dot / (cfg.d_k as f64).sqrt();
                }
                let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = scores.iter().map(|s| (s - top).exp()).sum();
                for v in 0..vp {
                    let a = (scores[v] - top).exp() / total;
                    attention[[h, i, p, v]] = a;
                    for &c in &cols {
                        let value: f64 = (0..de).map(|e| bank.e_prime[[v, e]] * w.w_v[[e, c]]).sum();
                        z[c] += a * value;
                    }
                }
            }
            for j in 0..cfg.d_llm {
                output[[i, p, j]] = (0..dm).map(|m| z[m] * w.w_out[[m, j]]).sum();
            }
        }
    }
    (output, attention)
}

// ---- statistics ----

/// Exhaustive-scan summary of `closes[..=asof]`.
pub fn scan_stats(closes: &[f64], asof: usize) -> StatsSummary {
    let w = &closes[..=asof];
    let n = w.len();
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let latest = |v: f64| (0..n).filter(|&i| w[i] == v).map(|i| asof - i).min().expect("value present");
    let k = (n - 1) / 2;
    let median = w
        .iter()
        .copied()
        .find(|&v| {
            let less = w.iter().filter(|x| **x < v).count();
            let upto = w.iter().filter(|x| **x <= v).count();
            less <= k && k < upto
        })
        .expect("some element is the lower median");
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (i, &y) in w.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += y;
        sxy += x * y;
    }
    // numerator of the least-squares slope; the denominator is positive
    let slope_num = n as f64 * sxy - sx * sy;
    StatsSummary {
        min_close: PricePoint { value: lo, days_ago: latest(lo) },
        max_close: PricePoint { value: hi, days_ago: latest(hi) },
        median_close: PricePoint { value: median, days_ago: latest(median) },
        trend: if slope_num >= 0.0 { Trend::Upward } else { Trend::Downward },
        window_len: n,
    }
}

// ---- ranking ----

fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let same = xs.iter().filter(|y| *y == x).count() as f64;
            less + (same + 1.0) / 2.0
        })
        .collect()
}

/// Spearman correlation between "position in `order`" (first = best) and
/// `realized`, from first principles. Uses `1 - 6 sum d^2 / (n (n^2 - 1))`
/// when there are no ties and the Pearson correlation of ranks otherwise.
pub fn spearman_from_definition(order: &[String], realized: &BTreeMap<String, f64>) -> f64 {
    let n = order.len();
    let score: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
    let ret: Vec<f64> = order.iter().map(|t| realized[t]).collect();
    let rs = brute_ranks(&score);
    let rr = brute_ranks(&ret);
    let nf = n as f64;
    let distinct = (0..n).all(|i| (i + 1..n).all(|j| ret[i] != ret[j]));
    if distinct {
        let d2: f64 = rs.iter().zip(&rr).map(|(a, b)| (a - b) * (a - b)).sum();
        return 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
    }
    let ma = rs.iter().sum::<f64>() / nf;
    let mb = rr.iter().sum::<f64>() / nf;
    let cov: f64 = rs.iter().zip(&rr).map(|(a, b)| (a - ma) * (b - mb)).sum();
    let va: f64 = rs.iter().map(|a| (a - ma) * (a - ma)).sum();
    let vb: f64 = rr.iter().map(|b| (b - mb) * (b - mb)).sum();
    cov / (va * vb).sqrt()
}

// ---- backtest and metrics ----

/// Sample standard deviation, mean first then squared deviations.
pub fn two_pass_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut mean = 0.0;
    for x in xs {
        mean += x;
    }
    mean /= n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    (ss / (n - 1.0)).sqrt()
}

/// Worst peak-to-later-trough loss over all pairs `i <= j`.
pub fn quadratic_max_drawdown(curve: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..curve.len() {
        for j in i..curve.len() {
            worst = worst.max((curve[i] - curve[j]) / curve[i]);
        }
    }
    worst
}

/// Portfolio value, relative to the start, from a one-day-at-a-time
/// simulation: each day sell everything at the close, pay `cost_rate` on the
/// traded fraction of target weights, buy the top `k` equally and mark them
/// at the next close.
pub fn simulate_topk(
    panel: &OhlcvPanel,
    rankings: &BTreeMap<NaiveDate, Vec<String>>,
    dates: &[NaiveDate],
    k: usize,
    cost_rate: f64,
) -> Vec<f64> {
    let mut value = 1.0;
    let mut curve = vec![value];
    let mut before: BTreeSet<String> = BTreeSet::new();
    for pair in dates.windows(2) {
        let (today, tomorrow) = (pair[0], pair[1]);
        let picks: Vec<&String> =
            rankings[&today].iter().filter(|t| panel.tickers().contains(t)).take(k).collect();
        let now: BTreeSet<String> = picks.iter().map(|t| (*t).clone()).collect();
        let w_now = 1.0 / now.len() as f64;
        let w_before = if before.is_empty() { 0.0 } else { 1.0 / before.len() as f64 };
        let mut traded = 0.0;
        for t in now.union(&before) {
            let a = if now.contains(t) { w_now } else { 0.0 };
            let b = if before.contains(t) { w_before } else { 0.0 };
            traded += (a - b).abs();
        }
        let mut next = 0.0;
        for t in &picks {
            let shares = value * w_now / panel.bar(t, today).expect("bar").close;
            next += shares * panel.bar(t, tomorrow).expect("bar").close;
        }
        value = next - value * traded * cost_rate;
        curve.push(value);
        before = now;
    }
    curve
}

/// Matthews correlation as the Pearson correlation of the expanded 0/1
/// prediction and truth vectors; 0 when either is constant.
pub fn mcc_from_definition(tp: u64, tn: u64, fp: u64, fn_: u64) -> f64 {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (p, t, count) in [(1.0, 1.0, tp), (0.0, 0.0, tn), (1.0, 0.0, fp), (0.0, 1.0, fn_)] {
        for _ in 0..count {
            pred.push(p);
            truth.push(t);
        }
    }
    let n = pred.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vt = 0.0;
    for (p, t) in pred.iter().zip(&truth) {
        cov += (p - mp) * (t - mt);
        vp += (p - mp) * (p - mp);
        vt += (t - mt) * (t - mt);
    }
    if vp == 0.0 || vt == 0.0 {
        return 0.0;
    }
    cov / (vp * vt).sqrt()
}

/// Rise/Fall for every start index with a full horizon ahead, by scanning.
pub fn scan_movement(closes: &[f64], horizon: usize) -> Vec<bool> {
    let mut out = Vec::new();
    for t in 0..closes.len() {
        if t + horizon < closes.len() {
            out.push(closes[t + horizon] > closes[t]);
        }
    }
    out
}
