//! Daily buy-and-hold Top-K simulation and the annualised performance
//! metrics.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use thiserror::Error;

use crate::market::{MarketError, OhlcvPanel};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no returns")]
    Empty,
    #[error("need at least 2 returns for volatility, have {0}")]
    TooFewReturns(usize),
    #[error("return {value} at index {index} is not above -1")]
    InvalidReturn { index: usize, value: f64 },
    #[error("volatility is zero")]
    ZeroVolatility,
    #[error("curve value {value} at index {index} is not positive")]
    NonPositiveCurve { index: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("no ranking for {0}")]
    MissingRanking(NaiveDate),
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 trading dates")]
    TooFewDates,
    #[error("no rankable ticker on {0}")]
    NothingToHold(NaiveDate),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub k: usize,
    /// Charged on turnover, the sum of absolute target-weight changes.
    pub cost_rate: f64,
    pub initial_capital: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { k: 3, cost_rate: 0.0, initial_capital: 1.0 }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if self.k == 0 {
            return Err(BacktestError::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.cost_rate) {
            return Err(BacktestError::InvalidConfig(format!("cost_rate {} outside [0, 1)", self.cost_rate)));
        }
        if !(self.initial_capital > 0.0) || !self.initial_capital.is_finite() {
            return Err(BacktestError::InvalidConfig("initial_capital must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PerformanceMetrics {
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    /// Undefined when the volatility is zero.
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BacktestResult {
    /// `dates[0]` is the first rebalance day; `dates[i]` for `i >= 1` is the
    /// close at which return `i - 1` is realised.
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    /// Growth of one unit of capital; `curve[0] = 1`.
    pub curve: Vec<f64>,
    /// Tickers held over each return period.
    pub holdings: Vec<Vec<String>>,
    pub turnover: Vec<f64>,
    pub metrics: PerformanceMetrics,
    pub initial_capital: f64,
}

impl BacktestResult {
    /// `date,portfolio_return,cumulative,holdings`; the first row is the
    /// starting point with an empty holding list.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "portfolio_return", "cumulative", "holdings"])?;
        for (i, d) in self.dates.iter().enumerate() {
            let (r, h) = if i == 0 { (0.0, String::new()) } else { (self.returns[i - 1], self.holdings[i - 1].join(";")) };
            w.write_record([d.format("%Y-%m-%d").to_string(), r.to_string(), self.curve[i].to_string(), h])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Holds the first `k` ranked tickers equal-weighted from close(t) to
/// close(t+1) for each consecutive pair of `dates`. Rankings must exist for
/// every date but the last; tickers absent from the panel are skipped.
pub fn run_topk(
    panel: &OhlcvPanel,
    rankings: &BTreeMap<NaiveDate, Vec<String>>,
    dates: &[NaiveDate],
    cfg: &StrategyConfig,
) -> Result<BacktestResult, BacktestError> {
    cfg.validate()?;
    if dates.len() < 2 {
        return Err(BacktestError::TooFewDates);
    }
    let idx: Vec<usize> = dates.iter().map(|d| panel.date_index(*d)).collect::<Result<_, _>>()?;

    let mut returns = Vec::with_capacity(dates.len() - 1);
    let mut holdings = Vec::with_capacity(dates.len() - 1);
    let mut turnover = Vec::with_capacity(dates.len() - 1);
    let mut prev_weights: BTreeMap<String, f64> = BTreeMap::new();
    for w in 0..dates.len() - 1 {
        let date = dates[w];
        let ranked = rankings.get(&date).ok_or(BacktestError::MissingRanking(date))?;
        let held: Vec<String> = ranked.iter().filter(|t| panel.ticker_index(t).is_ok()).take(cfg.k).cloned().collect();
        if held.is_empty() {
            return Err(BacktestError::NothingToHold(date));
        }
        if held.len() < cfg.k {
            log::warn!("{date}: only {} of {} requested holdings available", held.len(), cfg.k);
        }
        let weight = 1.0 / held.len() as f64;
        let weights: BTreeMap<String, f64> = held.iter().map(|t| (t.clone(), weight)).collect();
        let mut tv = 0.0;
        for (t, w) in &weights {
            tv += (w - prev_weights.get(t).copied().unwrap_or(0.0)).abs();
        }
        for (t, w) in &prev_weights {
            if !weights.contains_key(t) {
                tv += w.abs();
            }
        }
        let mut gross = 0.0;
        for t in &held {
            let bars = panel.bars_at(panel.ticker_index(t)?);
            gross += weight * (bars[idx[w + 1]].close / bars[idx[w]].close);
        }
        returns.push(gross - 1.0 - tv * cfg.cost_rate);
        holdings.push(held);
        turnover.push(tv);
        prev_weights = weights;
    }

    let curve = curve_from_returns(&returns)?;
    let metrics = compute_metrics(&returns)?;
    Ok(BacktestResult {
        dates: dates.to_vec(),
        returns,
        curve,
        holdings,
        turnover,
        metrics,
        initial_capital: cfg.initial_capital,
    })
}

pub fn curve_from_returns(returns: &[f64]) -> Result<Vec<f64>, MetricError> {
    let mut curve = Vec::with_capacity(returns.len() + 1);
    curve.push(1.0);
    for (i, r) in returns.iter().enumerate() {
        if !(*r > -1.0) {
            return Err(MetricError::InvalidReturn { index: i, value: *r });
        }
        curve.push(curve[i] * (1.0 + r));
    }
    Ok(curve)
}

pub fn compute_metrics(returns: &[f64]) -> Result<PerformanceMetrics, MetricError> {
    let ar = annualized_return(returns)?;
    let av = annualized_vol(returns)?;
    let sharpe = match sharpe(ar, av, 0.0) {
        Ok(s) => Some(s),
        Err(MetricError::ZeroVolatility) => None,
        Err(e) => return Err(e),
    };
    Ok(PerformanceMetrics {
        annualized_return: ar,
        annualized_volatility: av,
        sharpe,
        max_drawdown: max_drawdown(&curve_from_returns(returns)?)?,
    })
}

/// `(prod(1 + r_i))^(252 / N) - 1`.
pub fn annualized_return(returns: &[f64]) -> Result<f64, MetricError> {
    if returns.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut growth = 1.0;
    for (i, r) in returns.iter().enumerate() {
        if !(*r > -1.0) {
            return Err(MetricError::InvalidReturn { index: i, value: *r });
        }
        growth *= 1.0 + r;
    }
    Ok(growth.powf(TRADING_DAYS_PER_YEAR / returns.len() as f64) - 1.0)
}

/// Sample standard deviation of daily returns scaled by `sqrt(252)`.
pub fn annualized_vol(returns: &[f64]) -> Result<f64, MetricError> {
    let n = returns.len();
    if n < 2 {
        return Err(MetricError::TooFewReturns(n));
    }
    // the mean of a constant series can be off by an ulp
    if returns.iter().all(|r| *r == returns[0]) {
        return Ok(0.0);
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt() * TRADING_DAYS_PER_YEAR.sqrt())
}

pub fn sharpe(ar: f64, av: f64, rf: f64) -> Result<f64, MetricError> {
    if av == 0.0 {
        return Err(MetricError::ZeroVolatility);
    }
    Ok((ar - rf) / av)
}

/// Largest fall from a running peak, as a fraction of that peak.
pub fn max_drawdown(curve: &[f64]) -> Result<f64, MetricError> {
    if curve.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut md: f64 = 0.0;
    for (i, &v) in curve.iter().enumerate() {
        if !(v > 0.0) {
            return Err(MetricError::NonPositiveCurve { index: i, value: v });
        }
        peak = peak.max(v);
        md = md.max((peak - v) / peak);
    }
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::OhlcvBar;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 3, day).unwrap()
    }

    fn panel(closes: &[(&str, &[f64])]) -> OhlcvPanel {
        let rows = closes.iter().flat_map(|(t, cs)| {
            cs.iter().enumerate().map(move |(i, c)| {
                (
                    t.to_string(),
                    OhlcvBar { date: d(i as u32 + 1), open: *c, high: *c, low: *c, close: *c, volume: 1.0 },
                )
            })
        });
        OhlcvPanel::from_bars(rows).unwrap()
    }

    #[test]
    fn single_holding_compounds() {
        let p = panel(&[("AAA", &[100.0, 101.0, 102.01]), ("BBB", &[50.0, 40.0, 30.0])]);
        let dates = vec![d(1), d(2), d(3)];
        let ranks: BTreeMap<_, _> = dates[..2].iter().map(|x| (*x, vec!["AAA".to_string(), "BBB".to_string()])).collect();
        let r = run_topk(&p, &ranks, &dates, &StrategyConfig { k: 1, ..Default::default() }).unwrap();
        assert!((r.returns[0] - 0.01).abs() < 1e-12 && (r.returns[1] - 0.01).abs() < 1e-12);
        assert!((r.curve[2] - 1.0201).abs() < 1e-12);
        assert_eq!(r.turnover, vec![1.0, 0.0]);
    }

    #[test]
    fn missing_ranking_is_reported() {
        let p = panel(&[("AAA", &[1.0, 2.0, 3.0])]);
        let ranks = BTreeMap::from([(d(1), vec!["AAA".to_string()])]);
        let err = run_topk(&p, &ranks, &[d(1), d(2), d(3)], &StrategyConfig::default()).unwrap_err();
        assert!(matches!(err, BacktestError::MissingRanking(x) if x == d(2)));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(annualized_return(&[0.0; 252]).unwrap(), 0.0);
        let ar = annualized_return(&[0.001; 252]).unwrap();
        assert!((ar - (1.001f64.powi(252) - 1.0)).abs() < 1e-12);
        let ar = annualized_return(&[0.002; 126]).unwrap();
        assert!((ar - (1.002f64.powi(126).powi(2) - 1.0)).abs() / ar < 1e-12);
        assert_eq!(annualized_vol(&[0.01; 10]).unwrap(), 0.0);
        assert_eq!(annualized_vol(&[0.01]), Err(MetricError::TooFewReturns(1)));
        assert_eq!(sharpe(0.1, 0.0, 0.0), Err(MetricError::ZeroVolatility));
        assert_eq!(sharpe(0.03, 0.2, 0.03).unwrap(), 0.0);
        assert!(matches!(annualized_return(&[0.1, -1.0]), Err(MetricError::InvalidReturn { index: 1, .. })));
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[1.0, 1.1, 1.2]).unwrap(), 0.0);
        assert!((max_drawdown(&[1.0, 1.25, 1.0]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(StrategyConfig { k: 0, ..Default::default() }.validate().is_err());
        assert!(StrategyConfig { cost_rate: 1.0, ..Default::default() }.validate().is_err());
    }
}
