//! The general expert in prediction and comparison modes.

use thiserror::Error;

use super::backend::{BackendError, ExpertBackend};
use super::prompt::{build_general_compare_prompt, build_general_predict_prompt, PromptBundle, PromptError};
use super::response::{parse_choice, parse_response, ExpertReport, Prediction, ResponseError};
use super::summary::SummarizedReport;
use super::ExpertKind;
use crate::ranking::ComparisonChoice;

#[derive(Debug, Error, PartialEq)]
pub enum ExpertError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{kind} response: {source}")]
    Response { kind: ExpertKind, source: ResponseError },
}

pub fn general_predict(summary: &SummarizedReport, backend: &dyn ExpertBackend, d: u32) -> Result<ExpertReport, ExpertError> {
    let bundle = build_general_predict_prompt(summary, d)?;
    let raw = backend.answer(&bundle)?;
    let (prediction, reasoning) =
        parse_response(&raw, ExpertKind::GeneralPredict).map_err(|source| ExpertError::Response { kind: ExpertKind::GeneralPredict, source })?;
    Ok(ExpertReport {
        kind: ExpertKind::GeneralPredict,
        ticker: summary.ticker.clone(),
        date: summary.date,
        prediction,
        reasoning,
        raw_response: raw,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub choice: ComparisonChoice,
    pub winner: String,
    /// True when no attempt parsed and the smaller ticker was taken.
    pub fallback: bool,
    pub attempts: usize,
    pub bundle: PromptBundle,
    /// Raw text of every attempt that returned one.
    pub responses: Vec<String>,
}

impl CompareOutcome {
    pub fn prediction(&self) -> Prediction {
        Prediction::Choice(self.choice, self.winner.clone())
    }
}

/// Asks which of two stocks will do better, up to `attempts` times.
///
/// Unparseable answers fall back to the lexicographically smaller ticker.
/// A backend error is returned only when no attempt produced any text.
pub fn general_compare(
    a: &SummarizedReport,
    b: &SummarizedReport,
    backend: &dyn ExpertBackend,
    d: u32,
    attempts: usize,
) -> Result<CompareOutcome, ExpertError> {
    let bundle = build_general_compare_prompt(a, b, d)?;
    let attempts = attempts.max(1);
    let mut responses = Vec::new();
    let mut last_err = None;
    for n in 1..=attempts {
        match backend.answer(&bundle) {
            Ok(raw) => {
                let parsed = parse_choice(&raw, &a.ticker, &b.ticker);
                responses.push(raw);
                if let Ok(choice) = parsed {
                    let winner = if choice == ComparisonChoice::StockA { &a.ticker } else { &b.ticker };
                    return Ok(CompareOutcome { choice, winner: winner.clone(), fallback: false, attempts: n, bundle, responses });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if responses.is_empty() {
        return Err(last_err.expect("at least one attempt").into());
    }
    let choice = if a.ticker <= b.ticker { ComparisonChoice::StockA } else { ComparisonChoice::StockB };
    let winner = if choice == ComparisonChoice::StockA { a.ticker.clone() } else { b.ticker.clone() };
    log::warn!("comparison {} vs {} unparsed after {attempts} attempts; {winner} chosen by tie-break", a.ticker, b.ticker);
    Ok(CompareOutcome { choice, winner, fallback: true, attempts, bundle, responses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    use chrono::NaiveDate;

    struct Sequence(Mutex<Vec<Result<String, BackendError>>>);

    impl ExpertBackend for Sequence {
        fn answer(&self, _: &PromptBundle) -> Result<String, BackendError> {
            self.0.lock().unwrap().remove(0)
        }
        fn identity(&self) -> String {
            "sequence".into()
        }
        fn is_deterministic(&self) -> bool {
            false
        }
    }

    fn summary(t: &str) -> SummarizedReport {
        SummarizedReport {
            ticker: t.into(),
            date: NaiveDate::from_ymd_opt(2023, 5, 1).unwrap(),
            digests: vec![(ExpertKind::News, "Input from News Analyst:\n- Prediction: Rise".into())],
            budget: 1000,
        }
    }

    #[test]
    fn retries_until_parsable() {
        let b = Sequence(Mutex::new(vec![Ok("garbage".into()), Ok("more garbage".into()), Ok("Stock BBB".into())]));
        let out = general_compare(&summary("AAA"), &summary("BBB"), &b, 1, 3).unwrap();
        assert_eq!(out.choice, ComparisonChoice::StockB);
        assert_eq!(out.attempts, 3);
        assert!(!out.fallback);
    }

    #[test]
    fn falls_back_to_smaller_ticker() {
        let b = Sequence(Mutex::new(vec![Ok("?".into()), Err(BackendError::Timeout)]));
        let out = general_compare(&summary("ZZZ"), &summary("MMM"), &b, 1, 2).unwrap();
        assert!(out.fallback);
        assert_eq!(out.winner, "MMM");
        assert_eq!(out.choice, ComparisonChoice::StockB);
    }

    #[test]
    fn backend_error_when_nothing_answered() {
        let b = Sequence(Mutex::new(vec![Err(BackendError::Timeout), Err(BackendError::Timeout)]));
        let err = general_compare(&summary("A"), &summary("B"), &b, 1, 2).unwrap_err();
        assert_eq!(err, ExpertError::Backend(BackendError::Timeout));
        let same = general_compare(&summary("A"), &summary("A"), &b, 1, 2).unwrap_err();
        assert!(matches!(same, ExpertError::Prompt(PromptError::SameTicker(_))));
    }
}
