//! Rule-based offline stand-ins for every expert.
//!
//! These are simple deterministic heuristics so that the whole pipeline can
//! run without a model:
//! - news: positive minus negative keyword count in the article;
//! - market: sign of the 5-day momentum signal (trend word as a fallback);
//! - alpha: sign of the comprehensive score in the prompt;
//! - fundamental: thresholds on the `EPS Growth` metric;
//! - general prediction: majority vote over the digest, the market analyst
//!   breaks ties, Fall otherwise;
//! - general comparison: net vote, then alpha score, then the smaller ticker.

use std::sync::LazyLock;

use regex::Regex;

use super::backend::{BackendError, ExpertBackend};
use super::prompt::{PromptBundle, ALPHA_SCORE_LEAD};
use super::response::FiveClassLabel;
use super::ExpertKind;

pub const POSITIVE_WORDS: &[&str] = &[
    "beat", "beats", "bright", "confidence", "gain", "gains", "growth", "optimistic", "outperform", "rally", "record",
    "robust", "strong", "surge", "upgrade", "upside",
];
pub const NEGATIVE_WORDS: &[&str] = &[
    "concern", "cut", "cuts", "decline", "downgrade", "drop", "fears", "lawsuit", "loss", "losses", "miss", "misses",
    "plunge", "slump", "warning", "weak",
];

static SCORE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"{}(-?\d+(?:\.\d+)?)", regex::escape(ALPHA_SCORE_LEAD))).expect("regex"));
static EPS_GROWTH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^EPS Growth: (-?\d+(?:\.\d+)?)%").expect("regex"));
static DIGEST_SCORE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"comprehensive score is (-?\d+(?:\.\d+)?)").expect("regex"));

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

fn between<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let s = text.find(start).map(|i| i + start.len()).unwrap_or(0);
    let e = text[s..].find(end).map(|i| s + i).unwrap_or(text.len());
    &text[s..e]
}

/// Positive minus negative keyword hits, case-insensitive, whole words.
pub fn sentiment(text: &str) -> (usize, usize) {
    let mut pos = 0;
    let mut neg = 0;
    for w in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let w = w.to_lowercase();
        if POSITIVE_WORDS.contains(&w.as_str()) {
            pos += 1;
        } else if NEGATIVE_WORDS.contains(&w.as_str()) {
            neg += 1;
        }
    }
    (pos, neg)
}

/// Vote counts from a digest: `(net direction, market vote)`.
fn tally(digest: &str) -> (i32, i32) {
    let mut net = 0;
    let mut market = 0;
    let mut current = "";
    for line in digest.lines() {
        if let Some(name) = line.strip_prefix("Input from ").and_then(|l| l.strip_suffix(':')) {
            current = name;
        } else if let Some(label) = line.strip_prefix("- Prediction: ") {
            let v = direction_of(label.trim());
            net += v;
            if current == ExpertKind::Market.display_name() {
                market = v;
            }
        }
    }
    (net, market)
}

fn direction_of(label: &str) -> i32 {
    match label.to_lowercase().as_str() {
        "rise" => 1,
        "fall" => -1,
        other => FiveClassLabel::ALL
            .iter()
            .find(|l| l.as_str().to_lowercase() == other)
            .map(|l| l.direction())
            .unwrap_or(0),
    }
}

fn digest_score(digest: &str) -> f64 {
    DIGEST_SCORE.captures(digest).and_then(|c| c[1].parse().ok()).unwrap_or(0.0)
}

fn word(rise: bool) -> &'static str {
    if rise {
        "Rise"
    } else {
        "Fall"
    }
}

impl ExpertBackend for MockBackend {
    fn answer(&self, b: &PromptBundle) -> Result<String, BackendError> {
        Ok(match b.kind {
            ExpertKind::News => {
                let article = between(&b.prompt, "News Article:\n", "\n\nQuestion:");
                let (p, n) = sentiment(article);
                format!(
                    "Reasoning: The article contains {p} positive and {n} negative cues.\nPrediction: {}",
                    word(p > n)
                )
            }
            ExpertKind::Market => match b.signals.get("momentum_5d") {
                Some(m) => format!("Reasoning: The 5-day momentum is {:.2}%.\nPrediction: {}", m * 100.0, word(*m > 0.0)),
                None => {
                    let up = b.prompt.contains("The overall trend is upward");
                    format!("Reasoning: The overall trend is {}.\nPrediction: {}", if up { "upward" } else { "downward" }, word(up))
                }
            },
            ExpertKind::Alpha => {
                let score: f64 = SCORE
                    .captures(&b.prompt)
                    .and_then(|c| c[1].parse().ok())
                    .ok_or_else(|| BackendError::BadResponse("alpha prompt has no comprehensive score".into()))?;
                format!("Reasoning: The comprehensive score is {score:.2}.\nPrediction: {}", word(score > 0.0))
            }
            ExpertKind::Fundamental => {
                let g: Option<f64> = EPS_GROWTH.captures(&b.prompt).and_then(|c| c[1].parse().ok());
                let label = match g {
                    Some(g) if g > 10.0 => FiveClassLabel::StrongRise,
                    Some(g) if g > 2.0 => FiveClassLabel::ModerateRise,
                    Some(g) if g >= -2.0 => FiveClassLabel::NoChange,
                    Some(g) if g >= -10.0 => FiveClassLabel::ModerateFall,
                    Some(_) => FiveClassLabel::StrongFall,
                    None => FiveClassLabel::NoChange,
                };
                let why = match g {
                    Some(g) => format!("EPS grew {g:.1}% over the prior year."),
                    None => "No EPS growth figure was reported.".to_string(),
                };
                format!("Reasoning: {why}\nPrediction: {}", label.as_str())
            }
            ExpertKind::GeneralPredict => {
                let report = between(&b.prompt, "Summarized Report:\n", "\n\nQuestion:");
                let (net, market) = tally(report);
                let rise = if net != 0 { net > 0 } else { market > 0 };
                let why = if net != 0 {
                    format!("The expert inputs net to {net:+} in favour of a {}.", if rise { "rise" } else { "fall" })
                } else if market != 0 {
                    "The expert inputs are split and the market analyst breaks the tie.".to_string()
                } else {
                    "The expert inputs are split with no tie-breaker.".to_string()
                };
                format!("Reasoning: {why}\nPrediction: {}", word(rise))
            }
            ExpertKind::GeneralCompare => {
                let (a, bt) = b
                    .ticker
                    .split_once('|')
                    .ok_or_else(|| BackendError::Unsupported(format!("comparison subject `{}`", b.ticker)))?;
                let ra = between(&b.prompt, &format!("Summarized Report for Stock {a}:\n"), &format!("\n\nSummarized Report for Stock {bt}:"));
                let rb = between(&b.prompt, &format!("Summarized Report for Stock {bt}:\n"), "\n\nQuestion:");
                let ka = (tally(ra).0, digest_score(ra));
                let kb = (tally(rb).0, digest_score(rb));
                let a_wins = match ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => a < bt,
                };
                let w = if a_wins { a } else { bt };
                format!("Reasoning: Net votes {} vs {}, alpha scores {:.2} vs {:.2}.\nPrediction: Stock {w}", ka.0, kb.0, ka.1, kb.1)
            }
        })
    }

    fn identity(&self) -> String {
        "mock".into()
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::prompt::{build_fundamental_prompt, build_news_prompt};

    #[test]
    fn news_sentiment_sign() {
        let up = MockBackend.answer(&build_news_prompt("Strong growth and record gains despite fears.", 1).unwrap()).unwrap();
        assert!(up.ends_with("Prediction: Rise"));
        let down = MockBackend.answer(&build_news_prompt("Weak demand, a downgrade.", 1).unwrap()).unwrap();
        assert!(down.ends_with("Prediction: Fall"));
    }

    #[test]
    fn fundamental_thresholds() {
        let m = |g: &str| {
            let b = build_fundamental_prompt("Quarter summary.", &[("EPS Growth".into(), g.into())]).unwrap();
            MockBackend.answer(&b).unwrap()
        };
        assert!(m("12.0%").ends_with("Strong Rise"));
        assert!(m("5%").ends_with("Moderate Rise"));
        assert!(m("0.0%").ends_with("No Change"));
        assert!(m("-5%").ends_with("Moderate Fall"));
        assert!(m("-30%").ends_with("Strong Fall"));
    }

    #[test]
    fn tally_reads_digest_lines() {
        let d = "Input from News Analyst:\n- Prediction: Rise\n\nInput from Market Analyst:\n- Prediction: Fall\n\nInput from Fundamental Analyst:\n- Prediction: No Change";
        assert_eq!(tally(d), (0, -1));
    }
}
