//! Condenses per-expert reports into the digest the general expert reads.

use chrono::NaiveDate;

use super::response::ExpertReport;
use super::ExpertKind;

/// Separator between expert digests.
pub const DIGEST_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SummarizedReport {
    pub ticker: String,
    pub date: NaiveDate,
    /// In the fixed order news, market, alpha, fundamental.
    pub digests: Vec<(ExpertKind, String)>,
    pub budget: usize,
}

impl SummarizedReport {
    pub fn text(&self) -> String {
        self.digests.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join(DIGEST_SEPARATOR)
    }

    pub fn digest(&self, kind: ExpertKind) -> Option<&str> {
        self.digests.iter().find(|(k, _)| *k == kind).map(|(_, d)| d.as_str())
    }
}

/// Splits after `.`, `!` or `?` followed by whitespace or the end of text.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(pos, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let at_end = i + 1 == chars.len();
            if at_end || chars[i + 1].1.is_whitespace() {
                let end = pos + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn digest(report: &ExpertReport, limit: usize) -> String {
    let head = format!("Input from {}:", report.kind.display_name());
    let tail = format!("\n- Prediction: {}", report.prediction.label());
    let fixed = head.chars().count() + tail.chars().count();
    let mut body = String::new();
    if let Some(r) = &report.reasoning {
        let flat = r.split_whitespace().collect::<Vec<_>>().join(" ");
        let room = limit.saturating_sub(fixed + "\n- Reasoning: ".len());
        let mut kept = String::new();
        for s in sentences(&flat) {
            let extra = if kept.is_empty() { s.chars().count() } else { s.chars().count() + 1 };
            if kept.chars().count() + extra > room {
                break;
            }
            if !kept.is_empty() {
                kept.push(' ');
            }
            kept.push_str(s);
        }
        if !kept.is_empty() {
            body = format!("\n- Reasoning: {kept}");
        }
    }
    format!("{head}{body}{tail}")
}

/// Builds one digest per specialist report in the fixed expert order. Each
/// digest gets an equal share of `budget` (in characters, after separators);
/// reasoning is cut at a sentence boundary to fit, and dropped entirely when
/// not even one sentence fits. The header and prediction line are always
/// kept. Reports from the general expert are ignored.
pub fn summarize_reports(reports: &[ExpertReport], budget: usize) -> SummarizedReport {
    let mut chosen: Vec<&ExpertReport> = reports.iter().filter(|r| r.kind.is_specialist()).collect();
    chosen.sort_by_key(|r| r.kind.order());
    let n = chosen.len().max(1);
    let share = budget.saturating_sub(DIGEST_SEPARATOR.len() * (n - 1)) / n;
    let first = chosen.first();
    SummarizedReport {
        ticker: first.map(|r| r.ticker.clone()).unwrap_or_default(),
        date: first.map(|r| r.date).unwrap_or_default(),
        digests: chosen.iter().map(|r| (r.kind, digest(r, share))).collect(),
        budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::response::Prediction;
    use crate::market::MovementLabel;

    fn report(kind: ExpertKind, reasoning: Option<&str>) -> ExpertReport {
        ExpertReport {
            kind,
            ticker: "AAA".into(),
            date: NaiveDate::from_ymd_opt(2023, 1, 3).unwrap(),
            prediction: Prediction::Movement(MovementLabel::Rise),
            reasoning: reasoning.map(str::to_string),
            raw_response: String::new(),
        }
    }

    #[test]
    fn splits_sentences() {
        assert_eq!(sentences("One. Two! 3.5 is fine? Tail"), vec!["One.", "Two!", "3.5 is fine?", "Tail"]);
    }

    #[test]
    fn fits_within_budget_at_sentence_boundary() {
        let long = "First sentence here. ".repeat(40);
        let reps = [report(ExpertKind::Market, Some(&long)), report(ExpertKind::News, Some("Short."))];
        let s = summarize_reports(&reps, 300);
        assert!(s.text().chars().count() <= 300);
        assert_eq!(s.digests[0].0, ExpertKind::News);
        assert!(s.digests[1].1.contains("- Reasoning: First sentence here."));
        assert!(s.digests[1].1.lines().nth(1).unwrap().ends_with('.'));
    }

    #[test]
    fn ample_budget_keeps_everything() {
        let reps: Vec<_> = ExpertKind::SPECIALISTS.iter().map(|k| report(*k, Some("Because. Reasons."))).collect();
        let s = summarize_reports(&reps, 10_000);
        assert_eq!(s.digests.len(), 4);
        for (_, d) in &s.digests {
            assert!(d.contains("- Reasoning: Because. Reasons.\n- Prediction: Rise"));
        }
    }
}
