//! Expert prompts, model backends, response parsing and report summaries.

mod backend;
mod general;
mod mock;
pub mod prompt;
mod remote;
pub mod response;
pub mod summary;

use std::fmt;

pub use backend::{BackendError, ExpertBackend, ScriptedBackend, ScriptedResponse};
pub use general::{general_compare, general_predict, CompareOutcome, ExpertError};
pub use mock::MockBackend;
pub use prompt::{
    build_alpha_prompt, build_fundamental_prompt, build_general_compare_prompt, build_general_predict_prompt,
    build_market_prompt, build_news_prompt, AlphaInput, EmbeddingRef, PromptBundle, PromptError,
};
pub use remote::{RemoteBackend, RemoteConfig};
pub use response::{parse_choice, parse_response, render_response, ExpertReport, FiveClassLabel, Prediction, ResponseError};
pub use summary::{summarize_reports, SummarizedReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    News,
    Market,
    Alpha,
    Fundamental,
    GeneralPredict,
    GeneralCompare,
}

impl ExpertKind {
    /// The four specialists in their fixed fan-out order.
    pub const SPECIALISTS: [ExpertKind; 4] = [ExpertKind::News, ExpertKind::Market, ExpertKind::Alpha, ExpertKind::Fundamental];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpertKind::News => "news",
            ExpertKind::Market => "market",
            ExpertKind::Alpha => "alpha",
            ExpertKind::Fundamental => "fundamental",
            ExpertKind::GeneralPredict => "general_predict",
            ExpertKind::GeneralCompare => "general_compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ExpertKind::News,
            ExpertKind::Market,
            ExpertKind::Alpha,
            ExpertKind::Fundamental,
            ExpertKind::GeneralPredict,
            ExpertKind::GeneralCompare,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ExpertKind::News => "News Analyst",
            ExpertKind::Market => "Market Analyst",
            ExpertKind::Alpha => "Alpha Expert",
            ExpertKind::Fundamental => "Fundamental Analyst",
            ExpertKind::GeneralPredict | ExpertKind::GeneralCompare => "General Expert",
        }
    }

    pub fn is_specialist(self) -> bool {
        Self::SPECIALISTS.contains(&self)
    }

    pub(crate) fn order(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ExpertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
