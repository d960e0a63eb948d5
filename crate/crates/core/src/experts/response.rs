//! Expert labels and parsing of raw model responses.

use std::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use super::ExpertKind;
use crate::market::MovementLabel;
use crate::ranking::ComparisonChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FiveClassLabel {
    StrongRise,
    ModerateRise,
    NoChange,
    ModerateFall,
    StrongFall,
}

impl FiveClassLabel {
    pub const ALL: [FiveClassLabel; 5] = [
        FiveClassLabel::StrongRise,
        FiveClassLabel::ModerateRise,
        FiveClassLabel::NoChange,
        FiveClassLabel::ModerateFall,
        FiveClassLabel::StrongFall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FiveClassLabel::StrongRise => "Strong Rise",
            FiveClassLabel::ModerateRise => "Moderate Rise",
            FiveClassLabel::NoChange => "No Change",
            FiveClassLabel::ModerateFall => "Moderate Fall",
            FiveClassLabel::StrongFall => "Strong Fall",
        }
    }

    /// +1 for the rise classes, -1 for the fall classes, 0 for no change.
    pub fn direction(self) -> i32 {
        match self {
            FiveClassLabel::StrongRise | FiveClassLabel::ModerateRise => 1,
            FiveClassLabel::NoChange => 0,
            FiveClassLabel::ModerateFall | FiveClassLabel::StrongFall => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(untagged)]
pub enum Prediction {
    Movement(MovementLabel),
    FiveClass(FiveClassLabel),
    /// The ticker the comparator preferred is kept alongside the choice.
    Choice(ComparisonChoice, String),
}

impl Prediction {
    pub fn label(&self) -> String {
        match self {
            Prediction::Movement(m) => m.as_str().to_string(),
            Prediction::FiveClass(f) => f.as_str().to_string(),
            Prediction::Choice(_, t) => format!("Stock {t}"),
        }
    }

    /// Directional vote: +1 rise, -1 fall, 0 neutral or not directional.
    pub fn direction(&self) -> i32 {
        match self {
            Prediction::Movement(m) => m.sign(),
            Prediction::FiveClass(f) => f.direction(),
            Prediction::Choice(..) => 0,
        }
    }

    pub fn movement(&self) -> Option<MovementLabel> {
        match self {
            Prediction::Movement(m) => Some(*m),
            _ => None,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExpertReport {
    pub kind: ExpertKind,
    pub ticker: String,
    pub date: NaiveDate,
    pub prediction: Prediction,
    pub reasoning: Option<String>,
    pub raw_response: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ResponseError {
    #[error("response has no prediction")]
    MissingPrediction,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

fn prediction_value(line: &str) -> Option<&str> {
    let t = line.trim_start().trim_start_matches(['-', '*', ' ']);
    let head = t.get(..11)?;
    head.eq_ignore_ascii_case("prediction:").then(|| t[11..].trim())
}

fn normalize(token: &str) -> String {
    let t = token
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '[' | ']' | '*' | '.' | ',' | '`' | '“' | '”'));
    t.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Byte offset and value of the last `Prediction:` line.
fn last_prediction(raw: &str) -> Option<(usize, &str)> {
    let mut found = None;
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        if let Some(v) = prediction_value(line) {
            found = Some((offset, v));
        }
        offset += line.len();
    }
    found
}

/// Text after the first `Reasoning:` marker up to the last prediction line.
fn reasoning(raw: &str, end: usize) -> Option<String> {
    let lower = raw[..end].to_ascii_lowercase();
    let start = lower.find("reasoning:")? + "reasoning:".len();
    let text = raw[start..end].trim();
    (!text.is_empty()).then(|| text.to_string())
}

/// Extracts the prediction from the last `Prediction:` line (case and
/// whitespace insensitive) and the reasoning that precedes it.
pub fn parse_response(raw: &str, kind: ExpertKind) -> Result<(Prediction, Option<String>), ResponseError> {
    if kind == ExpertKind::GeneralCompare {
        let c = parse_choice(raw, "AAA", "BBB")?;
        let t = if c == ComparisonChoice::StockA { "AAA" } else { "BBB" };
        return Ok((Prediction::Choice(c, t.into()), last_prediction(raw).and_then(|(o, _)| reasoning(raw, o))));
    }
    let (offset, value) = last_prediction(raw).ok_or(ResponseError::MissingPrediction)?;
    let token = normalize(value);
    let prediction = if kind == ExpertKind::Fundamental {
        FiveClassLabel::ALL
            .iter()
            .find(|l| l.as_str().to_lowercase() == token)
            .map(|l| Prediction::FiveClass(*l))
    } else {
        match token.as_str() {
            "rise" => Some(Prediction::Movement(MovementLabel::Rise)),
            "fall" => Some(Prediction::Movement(MovementLabel::Fall)),
            _ => None,
        }
    };
    let prediction = prediction.ok_or_else(|| ResponseError::UnknownLabel(value.to_string()))?;
    Ok((prediction, reasoning(raw, offset)))
}

/// Finds which of the two tickers the response prefers: the last
/// `Prediction:` line when present, otherwise the last `Stock X` mention.
pub fn parse_choice(raw: &str, a: &str, b: &str) -> Result<ComparisonChoice, ResponseError> {
    let pick = |tok: &str| {
        let t = normalize(tok);
        let t = t.strip_prefix("stock ").unwrap_or(&t).trim().to_string();
        if t == a.to_lowercase() {
            Some(ComparisonChoice::StockA)
        } else if t == b.to_lowercase() {
            Some(ComparisonChoice::StockB)
        } else {
            None
        }
    };
    if let Some((_, v)) = last_prediction(raw) {
        return pick(v).ok_or_else(|| ResponseError::UnknownLabel(v.to_string()));
    }
    let words: Vec<&str> = raw.split_whitespace().collect();
    let mut last = None;
    for w in words.windows(2) {
        if normalize(w[0]) == "stock" {
            if let Some(c) = pick(w[1]) {
                last = Some(c);
            }
        }
    }
    last.ok_or(ResponseError::MissingPrediction)
}

/// Canonical response text for a prediction and optional reasoning.
pub fn render_response(prediction: &Prediction, reasoning: Option<&str>) -> String {
    match reasoning {
        Some(r) => format!("Reasoning: {r}\nPrediction: {}", prediction.label()),
        None => format!("Prediction: {}", prediction.label()),
    }
}
