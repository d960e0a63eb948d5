//! Instruction and prompt templates for every expert, and the builders that
//! fill them.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::summary::SummarizedReport;
use super::ExpertKind;
use crate::alpha::AlphaRecord;

pub const NEWS_INSTRUCTION: &str = "You are provided with a news article. Please predict how the stock will perform in the next <D> days. Your response should include your reasoning followed by a prediction of \"Rise\" or \"Fall\" in the specified format.\n\nFormat your response as follows:\nReasoning: [Your reasoning here]\nPrediction: [Rise or Fall]";
pub const NEWS_PROMPT: &str = "News Article:\n<ARTICLE>\n\nQuestion: Given the information in the news article above, how is the stock expected to perform in the next <D> days?";

pub const MARKET_INSTRUCTION: &str = "You are provided with historical OHLCV data of the past 20 days and a description of its statistics. Please predict how the stock will perform the next <D> day. Your response should be \"Rise\" or \"Fall\".";
pub const MARKET_PROMPT: &str = "<EMBEDDING>\n\nStatistics: <STATISTICS>\n\nQuestion: Given the reprogrammed OHLCV data and its statistics, how is the stock expected to perform in the next <D> days?";

pub const ALPHA_INSTRUCTION: &str = "You are provided with alpha factors derived from OHLCV data. Please predict the stock's movement based on the top contributing alpha factors. Your response should be \"Rise\" or \"Fall\".";
pub const ALPHA_PROMPT: &str = "Alpha Factors:\n<FACTORS>\n\nDescriptions:\n<DESCRIPTIONS>\n\nThe comprehensive score derived from LightGBM is: <SCORE>\n\nQuestion: Based on the provided alpha factors, how is the stock expected to perform in the next <D> days?";

pub const FUNDAMENTAL_INSTRUCTION: &str = "You are provided with a summarized report of the stock's earnings call transcripts and fundamental metrics. Please predict whether the stock will rise or fall in the next quarter. Your response should include a prediction in one of the following five categories: \"Strong Rise,\" \"Moderate Rise,\" \"No Change,\" \"Moderate Fall,\" or \"Strong Fall,\" followed by reasoning.";
pub const FUNDAMENTAL_PROMPT: &str = "Summarized Report: <REPORT>\n\nQuestion: Based on the fundamental information, will the stock rise or fall in the next quarter?";

pub const GENERAL_PREDICT_INSTRUCTION: &str = "You are provided with a summarized report of the stock. Please predict whether the stock will rise or fall the next <D> day.\n\nFormat your response as follows: Reasoning: [Your reasoning here] Prediction: [Rise or Fall].";
pub const GENERAL_PREDICT_PROMPT: &str = "Summarized Report:\n<REPORT>\n\nQuestion: Based on the summarized report, will the stock rise or fall in the next <D> days?";

pub const GENERAL_COMPARE_INSTRUCTION: &str = "You are provided with summarized reports of two stocks. Please determine which stock will perform better in the next <D> day. Please output \"Stock <A>\" or \"Stock <B>\".";
pub const GENERAL_COMPARE_PROMPT: &str = "Summarized Report for Stock <A>:\n<REPORT_A>\n\nSummarized Report for Stock <B>:\n<REPORT_B>\n\nQuestion: Based on the summarized reports, which stock will perform better in the next <D> days?";

/// Sentence that introduces the comprehensive score in alpha prompts.
pub const ALPHA_SCORE_LEAD: &str = "The comprehensive score derived from LightGBM is: ";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("news article is empty")]
    EmptyArticle,
    #[error("no alpha factors to report")]
    EmptyFactorList,
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("horizon must be at least one day")]
    InvalidHorizon,
    #[error("comparison needs two distinct tickers, got {0} twice")]
    SameTicker(String),
}

/// Reference to a reprogrammed embedding attached to a market prompt.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EmbeddingRef {
    pub id: String,
    pub shape: [usize; 3],
    /// Hex SHA-256 of the tensor contents.
    pub digest: String,
}

impl EmbeddingRef {
    /// Text stand-in for the tensor, used where a soft prompt cannot be
    /// injected.
    pub fn placeholder(&self) -> String {
        let [n, l, d] = self.shape;
        let short = &self.digest[..self.digest.len().min(16)];
        format!("Embeddings of Reprogrammed OHLCV: [{} {n}x{l}x{d} sha256:{short}]", self.id)
    }
}

/// Everything sent to one expert call.
///
/// `signals` carries numeric side inputs that only offline backends read
/// (for example the 5-day momentum used by the market mock); they never
/// appear in the prompt text.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PromptBundle {
    pub kind: ExpertKind,
    pub instruction: String,
    pub prompt: String,
    pub horizon: u32,
    pub attachment: Option<EmbeddingRef>,
    pub ticker: String,
    pub date: Option<NaiveDate>,
    pub signals: BTreeMap<String, f64>,
}

impl PromptBundle {
    fn new(kind: ExpertKind, instruction: String, prompt: String, horizon: u32) -> Self {
        Self { kind, instruction, prompt, horizon, attachment: None, ticker: String::new(), date: None, signals: BTreeMap::new() }
    }

    pub fn with_subject(mut self, ticker: &str, date: NaiveDate) -> Self {
        self.ticker = ticker.to_string();
        self.date = Some(date);
        self
    }

    pub fn with_signal(mut self, name: &str, value: f64) -> Self {
        self.signals.insert(name.to_string(), value);
        self
    }

    /// Instruction, separator and prompt as one block of text.
    pub fn render(&self) -> String {
        format!("Instruction: {}\n\n---\n\nPrompt: {}", self.instruction, self.prompt)
    }

    /// Hex SHA-256 over every field.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |s: &str| {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        put(self.kind.as_str());
        put(&self.instruction);
        put(&self.prompt);
        put(&self.horizon.to_string());
        put(&self.ticker);
        put(&self.date.map(|d| d.to_string()).unwrap_or_default());
        if let Some(a) = &self.attachment {
            put(&a.id);
            put(&a.digest);
        }
        for (k, v) in &self.signals {
            put(k);
            put(&format!("{:016x}", v.to_bits()));
        }
        hex::encode(h.finalize())
    }
}

/// Substitutes `<NAME>` slots in one left-to-right pass, so slot-like text
/// inside a value is left alone.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after
            .find('>')
            .and_then(|close| slots.iter().find(|(name, _)| *name == &after[..close]).map(|(_, v)| (close, *v)));
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn horizon(d: u32) -> Result<String, PromptError> {
    if d == 0 {
        return Err(PromptError::InvalidHorizon);
    }
    Ok(d.to_string())
}

pub fn build_news_prompt(article: &str, d: u32) -> Result<PromptBundle, PromptError> {
    if article.trim().is_empty() {
        return Err(PromptError::EmptyArticle);
    }
    let d = horizon(d)?;
    Ok(PromptBundle::new(
        ExpertKind::News,
        fill(NEWS_INSTRUCTION, &[("D", &d)]),
        fill(NEWS_PROMPT, &[("D", &d), ("ARTICLE", article)]),
        d.parse().expect("formatted horizon"),
    ))
}

pub fn build_market_prompt(embedding: &EmbeddingRef, stats_text: &str, d: u32) -> Result<PromptBundle, PromptError> {
    if stats_text.trim().is_empty() {
        return Err(PromptError::EmptyInput("statistics text"));
    }
    let ds = horizon(d)?;
    let mut b = PromptBundle::new(
        ExpertKind::Market,
        fill(MARKET_INSTRUCTION, &[("D", &ds)]),
        fill(MARKET_PROMPT, &[("D", &ds), ("EMBEDDING", &embedding.placeholder()), ("STATISTICS", stats_text)]),
        d,
    );
    b.attachment = Some(embedding.clone());
    Ok(b)
}

/// One alpha factor as shown to the alpha expert.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaInput<'a> {
    pub record: &'a AlphaRecord,
    pub value: f64,
    pub contribution: f64,
}

/// Lists factors in the given order (callers pass them by contribution) with
/// their source text and description, followed by the score to 2 decimals.
pub fn build_alpha_prompt(topk: &[AlphaInput<'_>], score: f64, d: u32) -> Result<PromptBundle, PromptError> {
    if topk.is_empty() {
        return Err(PromptError::EmptyFactorList);
    }
    let ds = horizon(d)?;
    let factors: Vec<String> = topk.iter().map(|f| format!("ID {}: {}", f.record.id, f.record.source_text)).collect();
    let descs: Vec<String> = topk.iter().map(|f| format!("- ID {}: {}", f.record.id, f.record.description)).collect();
    Ok(PromptBundle::new(
        ExpertKind::Alpha,
        ALPHA_INSTRUCTION.to_string(),
        fill(
            ALPHA_PROMPT,
            &[
                ("D", &ds),
                ("FACTORS", &factors.join("\n")),
                ("DESCRIPTIONS", &descs.join("\n")),
                ("SCORE", &format!("{score:.2}")),
            ],
        ),
        d,
    ))
}

/// Transcript summary followed by `key: value` metric lines.
pub fn build_fundamental_prompt(transcript_summary: &str, metrics: &[(String, String)]) -> Result<PromptBundle, PromptError> {
    if transcript_summary.trim().is_empty() {
        return Err(PromptError::EmptyInput("transcript summary"));
    }
    let mut report = transcript_summary.trim_end().to_string();
    if !metrics.is_empty() {
        report.push_str("\n\nFundamental Metrics:");
        for (k, v) in metrics {
            report.push_str(&format!("\n{k}: {v}"));
        }
    }
    // quarterly horizon; the day count is not part of this template
    Ok(PromptBundle::new(
        ExpertKind::Fundamental,
        FUNDAMENTAL_INSTRUCTION.to_string(),
        fill(FUNDAMENTAL_PROMPT, &[("REPORT", &report)]),
        63,
    ))
}

pub fn build_general_predict_prompt(summary: &SummarizedReport, d: u32) -> Result<PromptBundle, PromptError> {
    let ds = horizon(d)?;
    Ok(PromptBundle::new(
        ExpertKind::GeneralPredict,
        fill(GENERAL_PREDICT_INSTRUCTION, &[("D", &ds)]),
        fill(GENERAL_PREDICT_PROMPT, &[("D", &ds), ("REPORT", &summary.text())]),
        d,
    )
    .with_subject(&summary.ticker, summary.date))
}

/// The subject ticker of a comparison bundle is `A|B`.
pub fn build_general_compare_prompt(a: &SummarizedReport, b: &SummarizedReport, d: u32) -> Result<PromptBundle, PromptError> {
    if a.ticker == b.ticker {
        return Err(PromptError::SameTicker(a.ticker.clone()));
    }
    let ds = horizon(d)?;
    let slots = [
        ("D", ds.as_str()),
        ("A", a.ticker.as_str()),
        ("B", b.ticker.as_str()),
        ("REPORT_A", &a.text()),
        ("REPORT_B", &b.text()),
    ];
    Ok(PromptBundle::new(
        ExpertKind::GeneralCompare,
        fill(GENERAL_COMPARE_INSTRUCTION, &slots),
        fill(GENERAL_COMPARE_PROMPT, &slots),
        d,
    )
    .with_subject(&format!("{}|{}", a.ticker, b.ticker), a.date))
}
