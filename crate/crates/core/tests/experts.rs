use chrono::NaiveDate;
use mixtrade_core::experts::{
    build_news_prompt, general_compare, general_predict, parse_choice, parse_response, render_response,
    summarize_reports, ExpertKind, ExpertReport, FiveClassLabel, MockBackend, Prediction, ResponseError,
};
use mixtrade_core::market::MovementLabel;
use mixtrade_core::ranking::ComparisonChoice;
use mixtrade_core::selftest::{example_reports, EXAMPLE_ARTICLE};
use proptest::prelude::*;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 12, 29).unwrap()
}

fn prediction_for(kind: ExpertKind) -> impl Strategy<Value = Prediction> {
    if kind == ExpertKind::Fundamental {
        prop::sample::select(FiveClassLabel::ALL.to_vec()).prop_map(Prediction::FiveClass).boxed()
    } else {
        prop::sample::select(vec![MovementLabel::Rise, MovementLabel::Fall]).prop_map(Prediction::Movement).boxed()
    }
}

fn specialist() -> impl Strategy<Value = ExpertKind> {
    prop::sample::select(ExpertKind::SPECIALISTS.to_vec())
}

fn reasoning() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[A-Za-z][A-Za-z0-9 ,$%]{0,60}\\.( [A-Z][a-z ]{0,30}\\.){0,4}")
}

fn report(kind: ExpertKind, prediction: Prediction, reasoning: Option<String>) -> ExpertReport {
    ExpertReport { kind, ticker: "ZZZ".into(), date: date(), prediction, reasoning, raw_response: String::new() }
}

proptest! {
    #[test]
    fn parse_inverts_render((kind, p) in specialist().prop_flat_map(|k| (Just(k), prediction_for(k))), why in reasoning()) {
        let text = render_response(&p, why.as_deref());
        let (back, r) = parse_response(&text, kind).unwrap();
        prop_assert_eq!(back, p);
        prop_assert_eq!(r, why);
    }

    #[test]
    fn summaries_respect_the_budget(
        whys in prop::collection::vec(reasoning(), 4),
        budget in 200usize..1500,
    ) {
        let reports: Vec<ExpertReport> = ExpertKind::SPECIALISTS
            .iter()
            .zip(whys)
            .map(|(k, w)| report(*k, if *k == ExpertKind::Fundamental {
                Prediction::FiveClass(FiveClassLabel::NoChange)
            } else {
                Prediction::Movement(MovementLabel::Fall)
            }, w))
            .collect();
        let s = summarize_reports(&reports, budget);
        prop_assert!(s.text().chars().count() <= budget, "{} > {}", s.text().chars().count(), budget);
        prop_assert_eq!(s.digests.iter().map(|(k, _)| *k).collect::<Vec<_>>(), ExpertKind::SPECIALISTS.to_vec());
        for (k, d) in &s.digests {
            let title = format!("Input from {}:", k.display_name());
            prop_assert!(d.starts_with(&title));
            prop_assert!(d.contains("- Prediction: "));
        }
    }

    #[test]
    fn compare_is_symmetric_under_the_mock(
        pa in prop::collection::vec(any::<bool>(), 4),
        pb in prop::collection::vec(any::<bool>(), 4),
    ) {
        let mk = |ticker: &str, votes: &[bool]| {
            let reps: Vec<ExpertReport> = ExpertKind::SPECIALISTS
                .iter()
                .zip(votes)
                .map(|(k, up)| {
                    let p = if *k == ExpertKind::Fundamental {
                        Prediction::FiveClass(if *up { FiveClassLabel::ModerateRise } else { FiveClassLabel::ModerateFall })
                    } else {
                        Prediction::Movement(if *up { MovementLabel::Rise } else { MovementLabel::Fall })
                    };
                    ExpertReport { ticker: ticker.into(), ..report(*k, p, None) }
                })
                .collect();
            summarize_reports(&reps, 2000)
        };
        let a = mk("AAA", &pa);
        let b = mk("BBB", &pb);
        let ab = general_compare(&a, &b, &MockBackend, 1, 1).unwrap();
        let ba = general_compare(&b, &a, &MockBackend, 1, 1).unwrap();
        prop_assert_eq!(&ab.winner, &ba.winner);
        prop_assert_eq!(ab.choice, ba.choice.flip());
    }
}

#[test]
fn walkthrough_votes_rise() {
    let summary = summarize_reports(&example_reports(), 2000);
    let out = general_predict(&summary, &MockBackend, 1).unwrap();
    assert!(out.raw_response.ends_with("Prediction: Rise"));
    assert_eq!(out.prediction, Prediction::Movement(MovementLabel::Rise));
}

#[test]
fn mock_reads_the_news_article() {
    let b = build_news_prompt(EXAMPLE_ARTICLE, 1).unwrap();
    let raw = mixtrade_core::experts::ExpertBackend::answer(&MockBackend, &b).unwrap();
    let (p, _) = parse_response(&raw, ExpertKind::News).unwrap();
    assert_eq!(p, Prediction::Movement(MovementLabel::Rise));
}

#[test]
fn response_parsing_edge_cases() {
    let (p, r) = parse_response("Reasoning: a\nPrediction: fall\nPrediction:  RISE ", ExpertKind::Market).unwrap();
    assert_eq!(p, Prediction::Movement(MovementLabel::Rise));
    assert!(r.is_some());
    assert_eq!(parse_response("no label here", ExpertKind::News), Err(ResponseError::MissingPrediction));
    assert!(matches!(parse_response("Prediction: Sideways", ExpertKind::News), Err(ResponseError::UnknownLabel(_))));
    let (p, _) = parse_response("Prediction: Strong Fall", ExpertKind::Fundamental).unwrap();
    assert_eq!(p, Prediction::FiveClass(FiveClassLabel::StrongFall));
    assert_eq!(parse_choice("I prefer Stock MSFT over Stock AAPL. Stock MSFT", "AAPL", "MSFT").unwrap(), ComparisonChoice::StockB);
    assert_eq!(parse_choice("Prediction: Stock aapl", "AAPL", "MSFT").unwrap(), ComparisonChoice::StockA);
    assert!(parse_choice("Prediction: Stock IBM", "AAPL", "MSFT").is_err());
}
