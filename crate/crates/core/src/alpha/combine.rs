//! Comprehensive score from a factor cross-section, with per-factor
//! contributions.

use std::collections::BTreeMap;

use super::library::{AlphaId, FactorSlice};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CombineOutput {
    pub scores: BTreeMap<String, f64>,
    /// Per ticker, `(alpha id, contribution)` for every non-NaN factor, in
    /// library order.
    pub contributions: BTreeMap<String, Vec<(AlphaId, f64)>>,
    /// Tickers dropped because every factor was NaN.
    pub excluded: Vec<String>,
}

/// Maps a factor cross-section to a score per ticker. Implementations must be
/// deterministic for identical inputs.
pub trait FactorCombiner: Send + Sync {
    fn combine(&self, slice: &FactorSlice) -> CombineOutput;
}

/// Weighted sum of cross-sectionally z-scored factors.
///
/// `contribution(f) = weight(f) * z(f)` and the score is the sum of the
/// contributions. Factors without an explicit weight use `default_weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearZScoreCombiner {
    pub weights: BTreeMap<AlphaId, f64>,
    pub default_weight: f64,
}

impl Default for LinearZScoreCombiner {
    fn default() -> Self {
        Self { weights: BTreeMap::new(), default_weight: 1.0 }
    }
}

impl LinearZScoreCombiner {
    pub fn with_weights(weights: impl IntoIterator<Item = (AlphaId, f64)>) -> Self {
        Self { weights: weights.into_iter().collect(), default_weight: 1.0 }
    }

    pub fn weight(&self, id: AlphaId) -> f64 {
        self.weights.get(&id).copied().unwrap_or(self.default_weight)
    }
}

/// Population z-scores over the non-NaN entries. A cross-section with zero
/// dispersion maps to zeros.
pub fn zscore(values: &[f64]) -> Vec<f64> {
    let valid: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if valid.is_empty() {
        return vec![f64::NAN; values.len()];
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let var = valid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    values
        .iter()
        .map(|v| {
            if v.is_nan() {
                f64::NAN
            } else if sd == 0.0 || !sd.is_finite() {
                0.0
            } else {
                (v - mean) / sd
            }
        })
        .collect()
}

impl FactorCombiner for LinearZScoreCombiner {
    fn combine(&self, slice: &FactorSlice) -> CombineOutput {
        let nt = slice.tickers.len();
        let z: Vec<Vec<f64>> = (0..slice.alpha_ids.len())
            .map(|f| zscore(&(0..nt).map(|t| slice.get(t, f)).collect::<Vec<_>>()))
            .collect();

        let mut out = CombineOutput::default();
        for (t, ticker) in slice.tickers.iter().enumerate() {
            let contribs: Vec<(AlphaId, f64)> = slice
                .alpha_ids
                .iter()
                .enumerate()
                .filter(|(f, _)| !z[*f][t].is_nan())
                .map(|(f, id)| (*id, self.weight(*id) * z[f][t]))
                .collect();
            if contribs.is_empty() {
                log::warn!("{ticker} has no valid factor on {}; excluded from scoring", slice.date);
                out.excluded.push(ticker.clone());
                continue;
            }
            out.scores.insert(ticker.clone(), contribs.iter().map(|(_, c)| c).sum());
            out.contributions.insert(ticker.clone(), contribs);
        }
        out
    }
}

/// Top `k` factors by absolute contribution, ties broken by ascending id.
pub fn top_k_contributors(contributions: &[(AlphaId, f64)], k: usize) -> Vec<(AlphaId, f64)> {
    let mut v = contributions.to_vec();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn slice(ids: &[AlphaId], rows: &[&[f64]]) -> FactorSlice {
        FactorSlice {
            date: NaiveDate::from_ymd_opt(2023, 1, 3).unwrap(),
            tickers: (0..rows.len()).map(|i| format!("T{i}")).collect(),
            alpha_ids: ids.to_vec(),
            values: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    #[test]
    fn single_factor_score_is_zscore() {
        let s = slice(&[1], &[&[1.0], &[2.0], &[3.0]]);
        let out = LinearZScoreCombiner::with_weights([(1, 1.0)]).combine(&s);
        let z = zscore(&[1.0, 2.0, 3.0]);
        for (i, t) in s.tickers.iter().enumerate() {
            assert_eq!(out.scores[t], z[i]);
            assert_eq!(out.contributions[t], vec![(1, z[i])]);
        }
    }

    #[test]
    fn opposite_weights_cancel() {
        let s = slice(&[1, 2], &[&[1.0, 1.0], &[5.0, 5.0], &[2.0, 2.0]]);
        let out = LinearZScoreCombiner::with_weights([(1, 1.0), (2, -1.0)]).combine(&s);
        assert!(out.scores.values().all(|v| *v == 0.0));
    }

    #[test]
    fn all_nan_ticker_is_excluded() {
        let s = slice(&[1, 2], &[&[f64::NAN, f64::NAN], &[1.0, 2.0], &[3.0, f64::NAN]]);
        let out = LinearZScoreCombiner::default().combine(&s);
        assert_eq!(out.excluded, vec!["T0".to_string()]);
        assert_eq!(out.contributions["T2"].len(), 1);
    }

    #[test]
    fn top_k_orders_by_magnitude() {
        let c = [(1, 0.2), (2, -0.9), (3, 0.5)];
        assert_eq!(top_k_contributors(&c, 2), vec![(2, -0.9), (3, 0.5)]);
        assert_eq!(top_k_contributors(&c, 10).len(), 3);
        assert_eq!(top_k_contributors(&[(4, 0.5), (3, -0.5)], 1), vec![(3, -0.5)]);
    }
}
