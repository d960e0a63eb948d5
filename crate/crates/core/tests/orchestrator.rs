mod common;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{d, fixture_bundle};
use mixtrade_core::experts::{
    general_predict, summarize_reports, BackendError, ExpertBackend, ExpertKind, ExpertReport, FiveClassLabel,
    MockBackend, Prediction, PromptBundle, ScriptedBackend, ScriptedResponse,
};
use mixtrade_core::market::MovementLabel;
use mixtrade_core::orchestrator::{BackendSet, MissingPolicy, Pipeline, PipelineConfig, PipelineError};

fn report(kind: ExpertKind, prediction: Prediction, reasoning: &str) -> ExpertReport {
    ExpertReport {
        kind,
        ticker: "AAPL".into(),
        date: d("2023-11-29"),
        prediction,
        reasoning: Some(reasoning.into()),
        raw_response: String::new(),
    }
}

#[test]
fn appendix_scenario_majority_vote_rises() {
    let reports = [
        report(ExpertKind::News, Prediction::Movement(MovementLabel::Rise), "The news article highlights strong performance and positive future prospects for Apple."),
        report(ExpertKind::Market, Prediction::Movement(MovementLabel::Fall), "The stock has shown a slightly downward trend over the last 5 days, with a recent close of $192.02."),
        report(ExpertKind::Alpha, Prediction::Movement(MovementLabel::Rise), "The top alpha factors point upward."),
        report(ExpertKind::Fundamental, Prediction::FiveClass(FiveClassLabel::ModerateRise), "Apple's robust financial metrics suggest strong market confidence."),
    ];
    let summary = summarize_reports(&reports, 2000);
    let out = general_predict(&summary, &MockBackend, 1).unwrap();
    assert_eq!(out.prediction, Prediction::Movement(MovementLabel::Rise));
    assert!(out.raw_response.ends_with("Prediction: Rise"));
}

fn scripted(kind: ExpertKind, ticker: &str, date: &str, response: &str) -> ScriptedResponse {
    ScriptedResponse { kind, ticker: ticker.into(), date: d(date), response: response.into() }
}

#[test]
fn appendix_scenario_through_the_pipeline() {
    let data = fixture_bundle();
    let date = "2023-06-15";
    let quarter = data.fundamentals.lookup("T01", d(date), 120).unwrap().date.to_string();
    let script = ScriptedBackend::from_records(
        [
            scripted(ExpertKind::News, "T01", date, "Reasoning: Strong upgrade cycle.\nPrediction: Rise"),
            scripted(ExpertKind::Market, "T01", date, "Reasoning: Slightly downward trend.\nPrediction: Fall"),
            scripted(ExpertKind::Alpha, "T01", date, "Reasoning: Factors are positive.\nPrediction: Rise"),
            scripted(ExpertKind::Fundamental, "T01", &quarter, "Reasoning: Robust metrics.\nPrediction: Moderate Rise"),
        ],
        "fig14",
    )
    .unwrap();
    let backends = BackendSet::uniform(Arc::new(script)).with(ExpertKind::GeneralPredict, Arc::new(MockBackend));
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, data, &backends).unwrap();
    let out = p.run_prediction("T01", d(date)).unwrap();
    assert_eq!(out.general.prediction.label(), "Rise");
    assert!(out.general.raw_response.ends_with("Prediction: Rise"));
    assert_eq!(out.experts.len(), 4);
    assert_eq!(out.calls.len(), 5);
}

#[test]
fn single_expert_passes_through() {
    let data = fixture_bundle();
    let backends = BackendSet::uniform(Arc::new(MockBackend));
    let cfg = PipelineConfig { enabled: vec![ExpertKind::News], ..Default::default() };
    let p = Pipeline::new(&cfg, data, &backends).unwrap();
    for date in ["2023-03-01", "2023-03-02", "2023-03-03", "2023-07-10"] {
        let out = p.run_prediction("T05", d(date)).unwrap();
        assert_eq!(out.experts.len(), 1);
        assert_eq!(out.general.prediction.movement(), out.experts[0].prediction.movement());
    }
}

#[test]
fn missing_news_is_reported() {
    let data = fixture_bundle();
    let backends = BackendSet::uniform(Arc::new(MockBackend));
    let cfg = PipelineConfig { news_lookback_days: 0, ..Default::default() };
    let p = Pipeline::new(&cfg, data, &backends).unwrap();
    // weekends never carry articles
    let sunday_missing = data.news.lookup("T01", d("2023-03-05"), 0).is_none();
    assert!(sunday_missing);
    let day = data
        .panel
        .calendar()
        .iter()
        .copied()
        .find(|day| data.news.lookup("T01", *day, 0).is_none())
        .expect("the fixture skips some days");
    match p.run_prediction("T01", day) {
        Err(PipelineError::MissingInput { expert, .. }) => assert_eq!(expert, ExpertKind::News),
        other => panic!("expected MissingInput, got {other:?}"),
    }
    let empty = PipelineConfig { enabled: vec![], ..Default::default() };
    assert!(matches!(Pipeline::new(&empty, data, &backends), Err(PipelineError::InvalidConfig(_))));
}

/// Compares by a fixed latent score read from the ticker name.
struct Latent {
    scores: BTreeMap<String, f64>,
    calls: AtomicUsize,
}

impl ExpertBackend for Latent {
    fn answer(&self, b: &PromptBundle) -> Result<String, BackendError> {
        if b.kind != ExpertKind::GeneralCompare {
            return MockBackend.answer(b);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let (a, c) = b.ticker.split_once('|').unwrap();
        let w = if self.scores[a] >= self.scores[c] { a } else { c };
        Ok(format!("Prediction: Stock {w}"))
    }
    fn identity(&self) -> String {
        "latent".into()
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

#[test]
fn ranking_follows_latent_scores_and_clamps_k() {
    let data = fixture_bundle();
    let latent = Arc::new(Latent {
        scores: [("T01", 0.2), ("T02", 0.9), ("T03", -0.4)].into_iter().map(|(t, s)| (t.to_string(), s)).collect(),
        calls: AtomicUsize::new(0),
    });
    let backends = BackendSet::uniform(latent.clone());
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, data, &backends).unwrap();
    let tickers: Vec<String> = ["T03", "T01", "T02"].map(String::from).to_vec();
    let day = p.run_ranking_day(&tickers, d("2023-05-10"), 10).unwrap();
    assert_eq!(day.top_k, vec!["T02", "T01", "T03"]);
    assert_eq!(day.comparisons, 3);
    assert_eq!(latent.calls.load(Ordering::SeqCst), 3);
    assert!(matches!(p.run_ranking_day(&tickers[..1], d("2023-05-10"), 1), Err(PipelineError::TooFewTickers(1))));
}

#[test]
fn full_fixture_day_makes_all_pair_comparisons() {
    let data = fixture_bundle();
    let backends = BackendSet::uniform(Arc::new(MockBackend));
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, data, &backends).unwrap();
    let tickers = data.panel.tickers().to_vec();
    assert_eq!(tickers.len(), 30);
    let day = p.run_ranking_day(&tickers, d("2023-08-14"), 5).unwrap();
    assert_eq!(day.comparisons, 435);
    assert_eq!(day.ranked.table.comparisons, 435);
    let compare_calls = day.calls.iter().filter(|c| c.expert == ExpertKind::GeneralCompare).count();
    assert_eq!(compare_calls, 435);
    assert_eq!(day.top_k.len(), 5);
    assert_eq!(day.fallbacks, 0);
}

#[test]
fn disabling_an_expert_removes_only_its_digest() {
    let data = fixture_bundle();
    let backends = BackendSet::uniform(Arc::new(MockBackend));
    let full = PipelineConfig::default();
    let pf = Pipeline::new(&full, data, &backends).unwrap();
    for kind in ExpertKind::SPECIALISTS {
        let cfg = full.without(kind);
        assert_eq!(cfg.ablation_label(), format!("without_{kind}"));
        let pa = Pipeline::new(&cfg, data, &backends).unwrap();
        for (t, date) in [("T04", "2023-02-06"), ("T17", "2023-09-20")] {
            let (_, sf, _) = pf.gather(t, d(date)).unwrap();
            let (_, sa, _) = pa.gather(t, d(date)).unwrap();
            assert_eq!(sa.digests.len(), 3);
            assert!(sa.digest(kind).is_none());
            for other in ExpertKind::SPECIALISTS.into_iter().filter(|k| *k != kind) {
                assert_eq!(sa.digest(other), sf.digest(other), "{other} digest changed when {kind} was removed");
            }
        }
    }
}

#[test]
fn reruns_produce_identical_logs() {
    let data = fixture_bundle();
    let backends = BackendSet::uniform(Arc::new(MockBackend));
    let cfg = PipelineConfig { missing: MissingPolicy::Skip, ..Default::default() };
    let run = || {
        let p = Pipeline::new(&cfg, data, &backends).unwrap();
        let mut log = String::new();
        for day in ["2023-04-03", "2023-04-04"] {
            let r = p.run_ranking_day(data.panel.tickers(), d(day), 5).unwrap();
            for c in &r.calls {
                log.push_str(&serde_json::to_string(c).unwrap());
                log.push('\n');
            }
        }
        log
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.contains("\"cached\":true"));
}
