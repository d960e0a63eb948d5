//! Per (ticker, date) pipeline: gather inputs, fan out to the enabled
//! specialists, summarise, then ask the general expert to predict or compare.

mod inputs;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

pub use inputs::{FundamentalIndex, FundamentalRecord, InputError, NewsArticle, NewsIndex};

use crate::alpha::{
    build_factor_matrix, load_library, top_k_contributors, DescriptionBook, AlphaRecord, CombineOutput, EvalError, FactorCombiner, FactorMatrix,
};
use crate::experts::{
    build_alpha_prompt, build_fundamental_prompt, build_market_prompt, build_news_prompt, general_compare,
    general_predict, parse_response, summarize_reports, AlphaInput, CompareOutcome, EmbeddingRef, ExpertBackend,
    ExpertError, ExpertKind, ExpertReport, PromptBundle, SummarizedReport,
};
use crate::market::{load_panel, Field, OhlcvPanel};
use crate::ranking::{relaxed_sort_par, Ranked};
use crate::reprogram::{build_prototype_bank, synthetic_vocab, PatchConfig, PrototypeBank, ReprogramError, Reprogrammer};
use crate::stats::{render_text, summarize, StatsError};

/// Market variables fed to the reprogrammer, in row order.
pub const MARKET_FIELDS: [Field; 5] = [Field::Open, Field::High, Field::Low, Field::Close, Field::Volume];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("{expert} input missing for {ticker} on {date}: {what}")]
    MissingInput { expert: ExpertKind, ticker: String, date: NaiveDate, what: String },
    #[error("{expert} expert failed for {ticker} on {date}: {source}")]
    Expert { expert: ExpertKind, ticker: String, date: NaiveDate, source: ExpertError },
    #[error("ranking needs at least two tickers, got {0}")]
    TooFewTickers(usize),
    #[error("comparison {a} vs {b} on {date} failed: {source}")]
    Compare { a: String, b: String, date: NaiveDate, source: ExpertError },
    #[error(transparent)]
    Reprogram(#[from] ReprogramError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Alpha(#[from] EvalError),
    #[error("loading {what}: {message}")]
    Load { what: &'static str, message: String },
}

/// What to do with a ticker whose inputs are incomplete on a ranking day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Specialists that take part, any non-empty subset of the four.
    pub enabled: Vec<ExpertKind>,
    pub horizon: u32,
    pub seed: u64,
    /// Character budget of one summarised report.
    pub summary_budget: usize,
    /// Oldest usable article, in calendar days before the as-of date.
    pub news_lookback_days: i64,
    /// Oldest usable quarterly record, in calendar days.
    pub fundamental_max_age_days: i64,
    pub alpha_top_k: usize,
    /// Attempts per comparison before the tie-break fallback.
    pub compare_attempts: usize,
    pub missing: MissingPolicy,
    /// Wall-clock latency in the call log; off keeps logs reproducible.
    pub record_latency: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            enabled: ExpertKind::SPECIALISTS.to_vec(),
            horizon: 1,
            seed: 0,
            summary_budget: 2000,
            news_lookback_days: 5,
            fundamental_max_age_days: 120,
            alpha_top_k: 5,
            compare_attempts: 3,
            missing: MissingPolicy::Fail,
            record_latency: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.enabled.is_empty() {
            return bad("at least one expert must be enabled");
        }
        if self.enabled.iter().any(|k| !k.is_specialist()) {
            return bad("only news, market, alpha and fundamental can be enabled");
        }
        let mut seen = self.enabled.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.enabled.len() {
            return bad("an expert is enabled twice");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.summary_budget == 0 || self.alpha_top_k == 0 || self.compare_attempts == 0 {
            return bad("summary_budget, alpha_top_k and compare_attempts must be positive");
        }
        if self.news_lookback_days < 0 || self.fundamental_max_age_days < 0 {
            return bad("lookbacks must be non-negative");
        }
        Ok(())
    }

    pub fn is_enabled(&self, kind: ExpertKind) -> bool {
        self.enabled.contains(&kind)
    }

    /// Copy with one specialist removed.
    pub fn without(&self, kind: ExpertKind) -> Self {
        Self { enabled: self.enabled.iter().copied().filter(|k| *k != kind).collect(), ..self.clone() }
    }

    /// `full`, `without_<expert>` for a single removal, else the enabled list.
    pub fn ablation_label(&self) -> String {
        let missing: Vec<_> = ExpertKind::SPECIALISTS.iter().filter(|k| !self.is_enabled(**k)).collect();
        match missing.as_slice() {
            [] => "full".to_string(),
            [one] => format!("without_{one}"),
            _ => {
                let mut on: Vec<_> = self.enabled.iter().map(|k| k.as_str()).collect();
                on.sort();
                format!("only_{}", on.join("+"))
            }
        }
    }
}

/// Reprogramming weights and prototypes for the market expert.
#[derive(Debug, Clone)]
pub struct MarketModel {
    pub reprogrammer: Reprogrammer,
    pub bank: PrototypeBank,
}

impl MarketModel {
    /// Seeded weights over a synthetic `vocab_size x embed_dim` vocabulary.
    pub fn seeded(cfg: PatchConfig, vocab_size: usize, embed_dim: usize, v_prime: usize, seed: u64) -> Result<Self, ReprogramError> {
        cfg.validate()?;
        if cfg.n_vars != MARKET_FIELDS.len() {
            return Err(ReprogramError::DegenerateConfig(format!(
                "market model reads {} variables, config has {}",
                MARKET_FIELDS.len(),
                cfg.n_vars
            )));
        }
        let vocab = synthetic_vocab(vocab_size, embed_dim, seed);
        let bank = build_prototype_bank(vocab.view(), v_prime, seed)?;
        Ok(Self { reprogrammer: Reprogrammer::new(cfg, embed_dim, seed)?, bank })
    }

    /// Default patching over a 1000 x 64 vocabulary with 32 prototypes.
    pub fn default_seeded(seed: u64) -> Result<Self, ReprogramError> {
        Self::seeded(PatchConfig::default(), 1000, 64, 32, seed)
    }
}

/// Input files of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DataPaths {
    pub panel: PathBuf,
    pub news: PathBuf,
    pub fundamentals: PathBuf,
    pub library: PathBuf,
    pub descriptions: Option<PathBuf>,
}

impl DataPaths {
    /// The standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            panel: dir.join("panel.csv"),
            news: dir.join("news.jsonl"),
            fundamentals: dir.join("fundamentals.jsonl"),
            library: dir.join("alphas.tsv"),
            descriptions: Some(dir.join("alpha_descriptions.tsv")),
        }
    }
}

/// Everything the specialists read, prepared once.
pub struct DataBundle {
    pub panel: OhlcvPanel,
    pub news: NewsIndex,
    pub fundamentals: FundamentalIndex,
    pub library: Vec<AlphaRecord>,
    pub factors: FactorMatrix,
    /// Combined scores per date.
    pub scores: BTreeMap<NaiveDate, CombineOutput>,
    pub market: MarketModel,
}

impl DataBundle {
    /// Evaluates the factor library over the whole calendar and combines it
    /// per date.
    pub fn prepare(
        panel: OhlcvPanel,
        news: NewsIndex,
        fundamentals: FundamentalIndex,
        library: Vec<AlphaRecord>,
        combiner: &dyn FactorCombiner,
        market: MarketModel,
    ) -> Result<Self, PipelineError> {
        let factors = build_factor_matrix(&library, &panel, panel.calendar())?;
        let scores = factors
            .dates
            .par_iter()
            .map(|d| (*d, combiner.combine(&factors.slice(*d).expect("date from matrix"))))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        Ok(Self { panel, news, fundamentals, library, factors, scores, market })
    }

    /// Loads every input file and prepares the bundle.
    pub fn load(paths: &DataPaths, combiner: &dyn FactorCombiner, market: MarketModel) -> Result<Self, PipelineError> {
        let load = |what: &'static str| move |e: &dyn std::fmt::Display| PipelineError::Load { what, message: e.to_string() };
        let panel = load_panel(&paths.panel).map_err(|e| load("panel")(&e))?;
        let news = NewsIndex::load(&paths.news).map_err(|e| load("news")(&e))?;
        let fundamentals = FundamentalIndex::load(&paths.fundamentals).map_err(|e| load("fundamentals")(&e))?;
        let book = match &paths.descriptions {
            Some(p) => DescriptionBook::load(p).map_err(|e| load("alpha descriptions")(&e))?,
            None => DescriptionBook::default(),
        };
        let library = load_library(&paths.library, &book).map_err(|e| load("alpha library")(&e))?;
        Self::prepare(panel, news, fundamentals, library, combiner, market)
    }

    fn record(&self, id: u32) -> &AlphaRecord {
        self.library.iter().find(|r| r.id == id).expect("contribution from library factor")
    }
}

/// One backend per expert kind.
#[derive(Clone)]
pub struct BackendSet {
    by_kind: BTreeMap<ExpertKind, Arc<dyn ExpertBackend>>,
}

impl BackendSet {
    pub fn uniform(backend: Arc<dyn ExpertBackend>) -> Self {
        let all = [ExpertKind::GeneralPredict, ExpertKind::GeneralCompare];
        Self { by_kind: ExpertKind::SPECIALISTS.iter().chain(all.iter()).map(|k| (*k, backend.clone())).collect() }
    }

    pub fn with(mut self, kind: ExpertKind, backend: Arc<dyn ExpertBackend>) -> Self {
        self.by_kind.insert(kind, backend);
        self
    }

    pub fn get(&self, kind: ExpertKind) -> &dyn ExpertBackend {
        self.by_kind[&kind].as_ref()
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CallRecord {
    pub date: NaiveDate,
    /// `A|B` for comparisons.
    pub ticker: String,
    pub expert: ExpertKind,
    pub bundle_hash: String,
    pub backend: String,
    pub latency_ms: Option<u64>,
    pub label: String,
    /// Reused quarterly report; no backend call was made.
    pub cached: bool,
    pub attempts: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PredictionOutcome {
    pub general: ExpertReport,
    /// Specialist reports in fan-out order, kept for audit.
    pub experts: Vec<ExpertReport>,
    pub summary: SummarizedReport,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug)]
pub struct RankingDay {
    pub date: NaiveDate,
    pub ranked: Ranked,
    pub top_k: Vec<String>,
    pub skipped: Vec<String>,
    pub comparisons: usize,
    pub fallbacks: usize,
    pub calls: Vec<CallRecord>,
}

struct Cached {
    report: ExpertReport,
    hash: String,
    backend: String,
}

pub struct Pipeline<'a> {
    pub cfg: &'a PipelineConfig,
    pub data: &'a DataBundle,
    pub backends: &'a BackendSet,
    /// Fundamental reports per (ticker, record date).
    quarterly: Mutex<HashMap<(String, NaiveDate), Cached>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig, data: &'a DataBundle, backends: &'a BackendSet) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self { cfg, data, backends, quarterly: Mutex::new(HashMap::new()) })
    }

    fn missing(&self, expert: ExpertKind, ticker: &str, date: NaiveDate, what: impl Into<String>) -> PipelineError {
        PipelineError::MissingInput { expert, ticker: ticker.to_string(), date, what: what.into() }
    }

    fn latency(&self, started: Instant) -> Option<u64> {
        self.cfg.record_latency.then(|| started.elapsed().as_millis() as u64)
    }

    fn news_bundle(&self, ticker: &str, date: NaiveDate) -> Result<PromptBundle, PipelineError> {
        let (_, text) = self
            .data
            .news
            .lookup(ticker, date, self.cfg.news_lookback_days)
            .ok_or_else(|| self.missing(ExpertKind::News, ticker, date, format!("no article within {} days", self.cfg.news_lookback_days)))?;
        build_news_prompt(&text, self.cfg.horizon).map_err(|e| self.missing(ExpertKind::News, ticker, date, e.to_string()))
    }

    fn market_bundle(&self, ticker: &str, date: NaiveDate) -> Result<PromptBundle, PipelineError> {
        let kind = ExpertKind::Market;
        let panel = &self.data.panel;
        let t = panel.date_index(date).map_err(|e| self.missing(kind, ticker, date, e.to_string()))?;
        let bars = panel.bars(ticker).map_err(|e| self.missing(kind, ticker, date, e.to_string()))?;
        let w = self.data.market.reprogrammer.cfg.window;
        if t + 1 < w {
            return Err(self.missing(kind, ticker, date, format!("needs {w} bars of history, has {}", t + 1)));
        }
        let span = &bars[t + 1 - w..=t];
        let window = Array2::from_shape_fn((MARKET_FIELDS.len(), w), |(v, i)| MARKET_FIELDS[v].of(&span[i]));
        let emb = self.data.market.reprogrammer.forward(window.view(), &self.data.market.bank)?;
        let closes: Vec<f64> = span.iter().map(|b| b.close).collect();
        let stats = summarize(&closes, w - 1)?;
        let (n, l, d) = emb.output.dim();
        let reference = EmbeddingRef { id: format!("{ticker}@{date}"), shape: [n, l, d], digest: emb.digest() };
        let mut bundle = build_market_prompt(&reference, &render_text(&stats), self.cfg.horizon)
            .map_err(|e| self.missing(kind, ticker, date, e.to_string()))?;
        if t >= 5 {
            bundle = bundle.with_signal("momentum_5d", bars[t].close / bars[t - 5].close - 1.0);
        }
        Ok(bundle)
    }

    fn alpha_bundle(&self, ticker: &str, date: NaiveDate) -> Result<PromptBundle, PipelineError> {
        let kind = ExpertKind::Alpha;
        let combined = self.data.scores.get(&date).ok_or_else(|| self.missing(kind, ticker, date, "date outside the factor matrix"))?;
        let (score, contribs) = match (combined.scores.get(ticker), combined.contributions.get(ticker)) {
            (Some(s), Some(c)) => (*s, c),
            _ => return Err(self.missing(kind, ticker, date, "no valid factor values")),
        };
        let di = self.data.factors.date_index(date).expect("scored date is in the matrix");
        let ti = self.data.factors.tickers.iter().position(|t| t == ticker).expect("scored ticker is in the matrix");
        let top = top_k_contributors(contribs, self.cfg.alpha_top_k);
        let inputs: Vec<AlphaInput> = top
            .iter()
            .map(|(id, c)| {
                let fi = self.data.factors.alpha_ids.iter().position(|x| x == id).expect("factor column");
                AlphaInput { record: self.data.record(*id), value: self.data.factors.get(di, ti, fi), contribution: *c }
            })
            .collect();
        build_alpha_prompt(&inputs, score, self.cfg.horizon).map_err(|e| self.missing(kind, ticker, date, e.to_string()))
    }

    fn ask(&self, bundle: PromptBundle, ticker: &str, date: NaiveDate) -> Result<(ExpertReport, CallRecord), PipelineError> {
        let kind = bundle.kind;
        let bundle = bundle.with_subject(ticker, date);
        let backend = self.backends.get(kind);
        let started = Instant::now();
        let wrap = |source: ExpertError| PipelineError::Expert { expert: kind, ticker: ticker.to_string(), date, source };
        let raw = backend.answer(&bundle).map_err(|e| wrap(e.into()))?;
        let latency_ms = self.latency(started);
        let (prediction, reasoning) =
            parse_response(&raw, kind).map_err(|source| wrap(ExpertError::Response { kind, source }))?;
        let record = CallRecord {
            date,
            ticker: ticker.to_string(),
            expert: kind,
            bundle_hash: bundle.hash(),
            backend: backend.identity(),
            latency_ms,
            label: prediction.label(),
            cached: false,
            attempts: 1,
            fallback: false,
        };
        let report = ExpertReport { kind, ticker: ticker.to_string(), date, prediction, reasoning, raw_response: raw };
        Ok((report, record))
    }

    fn fundamental(&self, ticker: &str, date: NaiveDate) -> Result<(ExpertReport, CallRecord), PipelineError> {
        let kind = ExpertKind::Fundamental;
        let rec = self
            .data
            .fundamentals
            .lookup(ticker, date, self.cfg.fundamental_max_age_days)
            .ok_or_else(|| self.missing(kind, ticker, date, "no quarterly record in range"))?;
        let key = (ticker.to_string(), rec.date);
        if let Some(c) = self.quarterly.lock().expect("cache lock").get(&key) {
            let report = ExpertReport { date, ..c.report.clone() };
            let record = CallRecord {
                date,
                ticker: ticker.to_string(),
                expert: kind,
                bundle_hash: c.hash.clone(),
                backend: c.backend.clone(),
                latency_ms: None,
                label: report.prediction.label(),
                cached: true,
                attempts: 0,
                fallback: false,
            };
            return Ok((report, record));
        }
        let metrics: Vec<(String, String)> = rec.metrics.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let bundle =
            build_fundamental_prompt(&rec.summary, &metrics).map_err(|e| self.missing(kind, ticker, date, e.to_string()))?;
        // keyed on the record date so a replayed session sees one call per quarter
        let (report, record) = self.ask(bundle, ticker, rec.date)?;
        let cached = Cached { report: report.clone(), hash: record.bundle_hash.clone(), backend: record.backend.clone() };
        self.quarterly.lock().expect("cache lock").insert(key, cached);
        Ok((ExpertReport { date, ..report }, CallRecord { date, ..record }))
    }

    /// Runs the enabled specialists in fixed order and summarises them.
    pub fn gather(&self, ticker: &str, date: NaiveDate) -> Result<(Vec<ExpertReport>, SummarizedReport, Vec<CallRecord>), PipelineError> {
        let mut reports = Vec::new();
        let mut calls = Vec::new();
        for kind in ExpertKind::SPECIALISTS {
            if !self.cfg.is_enabled(kind) {
                continue;
            }
            let (report, call) = match kind {
                ExpertKind::News => self.ask(self.news_bundle(ticker, date)?, ticker, date)?,
                ExpertKind::Market => self.ask(self.market_bundle(ticker, date)?, ticker, date)?,
                ExpertKind::Alpha => self.ask(self.alpha_bundle(ticker, date)?, ticker, date)?,
                ExpertKind::Fundamental => self.fundamental(ticker, date)?,
                _ => unreachable!("only specialists fan out"),
            };
            reports.push(report);
            calls.push(call);
        }
        let summary = summarize_reports(&reports, self.cfg.summary_budget);
        Ok((reports, summary, calls))
    }

    /// Prediction mode: rise or fall for one ticker on one date.
    pub fn run_prediction(&self, ticker: &str, date: NaiveDate) -> Result<PredictionOutcome, PipelineError> {
        let (experts, summary, mut calls) = self.gather(ticker, date)?;
        let backend = self.backends.get(ExpertKind::GeneralPredict);
        let started = Instant::now();
        let general = general_predict(&summary, backend, self.cfg.horizon).map_err(|source| PipelineError::Expert {
            expert: ExpertKind::GeneralPredict,
            ticker: ticker.to_string(),
            date,
            source,
        })?;
        let bundle = crate::experts::build_general_predict_prompt(&summary, self.cfg.horizon)
            .expect("prompt already built once");
        calls.push(CallRecord {
            date,
            ticker: ticker.to_string(),
            expert: ExpertKind::GeneralPredict,
            bundle_hash: bundle.hash(),
            backend: backend.identity(),
            latency_ms: self.latency(started),
            label: general.prediction.label(),
            cached: false,
            attempts: 1,
            fallback: false,
        });
        Ok(PredictionOutcome { general, experts, summary, calls })
    }

    /// Ranking mode: summaries for every ticker, all-pairs comparisons, and
    /// the top `k` by wins.
    pub fn run_ranking_day(&self, tickers: &[String], date: NaiveDate, k: usize) -> Result<RankingDay, PipelineError> {
        let gathered: Vec<_> = tickers.par_iter().map(|t| (t, self.gather(t, date))).collect();
        let mut summaries = BTreeMap::new();
        let mut calls = Vec::new();
        let mut skipped = Vec::new();
        for (t, r) in gathered {
            match r {
                Ok((_, s, c)) => {
                    summaries.insert(t.clone(), s);
                    calls.extend(c);
                }
                Err(e @ PipelineError::MissingInput { .. }) if self.cfg.missing == MissingPolicy::Skip => {
                    log::warn!("{e}; {t} left out of the {date} ranking");
                    skipped.push(t.clone());
                }
                Err(e) => return Err(e),
            }
        }
        if summaries.len() < 2 {
            return Err(PipelineError::TooFewTickers(summaries.len()));
        }
        let names: Vec<String> = summaries.keys().cloned().collect();
        let backend = self.backends.get(ExpertKind::GeneralCompare);
        let log = Mutex::new(Vec::new());
        let ranked = relaxed_sort_par(&names, |a, b| {
            let started = Instant::now();
            let out: CompareOutcome = general_compare(&summaries[a], &summaries[b], backend, self.cfg.horizon, self.cfg.compare_attempts)?;
            log.lock().expect("log lock").push(CallRecord {
                date,
                ticker: format!("{a}|{b}"),
                expert: ExpertKind::GeneralCompare,
                bundle_hash: out.bundle.hash(),
                backend: backend.identity(),
                latency_ms: self.latency(started),
                label: out.winner.clone(),
                cached: false,
                attempts: out.attempts,
                fallback: out.fallback,
            });
            Ok::<_, ExpertError>(out.choice)
        })
        .map_err(|e| PipelineError::Compare { a: e.a, b: e.b, date, source: e.source })?;
        let mut compare_calls = log.into_inner().expect("log lock");
        compare_calls.sort_by(|x, y| x.ticker.cmp(&y.ticker));
        let comparisons = compare_calls.len();
        let fallbacks = compare_calls.iter().filter(|c| c.fallback).count();
        calls.extend(compare_calls);
        let top_k = ranked.top_k(k).to_vec();
        Ok(RankingDay { date, ranked, top_k, skipped, comparisons, fallbacks, calls })
    }
}
