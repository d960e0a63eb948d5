//! Accuracy and Matthews correlation for Rise/Fall predictions.

use thiserror::Error;

use crate::market::MovementLabel;

#[derive(Debug, Error, PartialEq)]
pub enum EvalMetricError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{labels} labels but {predictions} predictions")]
    LengthMismatch { labels: usize, predictions: usize },
}

/// Counts with Rise as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, label: MovementLabel, prediction: MovementLabel) {
        match (label, prediction) {
            (MovementLabel::Rise, MovementLabel::Rise) => self.tp += 1,
            (MovementLabel::Fall, MovementLabel::Fall) => self.tn += 1,
            (MovementLabel::Fall, MovementLabel::Rise) => self.fp += 1,
            (MovementLabel::Rise, MovementLabel::Fall) => self.fn_ += 1,
        }
    }
}

pub fn score_predictions(labels: &[MovementLabel], predictions: &[MovementLabel]) -> Result<ConfusionMatrix, EvalMetricError> {
    if labels.len() != predictions.len() {
        return Err(EvalMetricError::LengthMismatch { labels: labels.len(), predictions: predictions.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (l, p) in labels.iter().zip(predictions) {
        cm.add(*l, *p);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalMetricError> {
    if cm.total() == 0 {
        return Err(EvalMetricError::EmptyMatrix);
    }
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}

/// Zero when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64, EvalMetricError> {
    if cm.total() == 0 {
        return Err(EvalMetricError::EmptyMatrix);
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub mcc: f64,
    pub counts: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionMatrix) -> Result<Self, EvalMetricError> {
        Ok(Self { accuracy: accuracy(&counts)?, mcc: mcc(&counts)?, counts })
    }
}
