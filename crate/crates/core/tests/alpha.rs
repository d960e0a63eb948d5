mod common;

use mixtrade_core::alpha::{
    build_factor_matrix, evaluate, evaluate_series, parse, parse_library, top_k_contributors, AlphaExpr, CombineOutput,
    DescriptionBook, FactorCombiner, LinearZScoreCombiner,
};
use mixtrade_core::oracle::{close_enough, naive_alpha, naive_value, random_expr, random_panel};
use mixtrade_core::seed::substream;
use mixtrade_core::selftest::REFERENCE_ALPHA;
use mixtrade_core::synth::{FIXTURE_DESCRIPTIONS, FIXTURE_LIBRARY};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn display_then_parse_is_identity(seed in any::<u64>()) {
        let mut rng = substream(seed, "alpha/roundtrip");
        let expr = random_expr(&mut rng, 4, 12);
        let text = expr.to_string();
        prop_assert_eq!(parse(&text).unwrap(), expr.clone(), "{}", text);
        // whitespace is not significant
        let spaced = text.replace('(', " ( ").replace(',', " , ");
        prop_assert_eq!(parse(&spaced).unwrap(), expr);
    }

    #[test]
    fn vectorised_matches_naive(seed in any::<u64>()) {
        let mut rng = substream(seed, "alpha/naive");
        let expr = random_expr(&mut rng, 3, 5);
        let panel = random_panel(&mut rng, 3, 16);
        let g = evaluate_series(&expr, &panel);
        for day in 0..panel.len() {
            for t in 0..3 {
                let (a, b) = (g.get(day, t), naive_value(&expr, &panel, t, day));
                prop_assert!(close_enough(a, b, 1e-9), "{} t={} day={}: {} vs {}", expr, t, day, a, b);
            }
        }
    }

    #[test]
    fn point_evaluation_needs_only_the_lookback(seed in any::<u64>()) {
        let mut rng = substream(seed, "alpha/lookback");
        let expr = random_expr(&mut rng, 3, 6);
        let panel = random_panel(&mut rng, 4, 30);
        let date = *panel.calendar().last().unwrap();
        if expr.lookback() <= panel.len() {
            let a = evaluate(&expr, &panel, date).unwrap();
            let b = naive_alpha(&expr, &panel, date).unwrap();
            for (t, v) in &a {
                prop_assert!(close_enough(*v, b[t], 1e-9), "{} {}: {} vs {}", expr, t, v, b[t]);
            }
        }
    }
}

#[test]
fn reference_expression_structure() {
    let e = parse(REFERENCE_ALPHA).unwrap();
    assert!(matches!(e, AlphaExpr::Rank(_)));
    assert_eq!(e.to_string(), REFERENCE_ALPHA);
    // ts_rank 10, corr 10 and ts_argmax 5 stack to 23 trading days
    assert_eq!(e.lookback(), 23);
}

#[test]
fn rejects_malformed_input() {
    for bad in [
        "",
        "close +",
        "ts_mean(close)",
        "ts_mean(close, 0)",
        "stddev(close, 1)",
        "corr(close, volume, 1)",
        "rank(close, 3)",
        "unknown_field",
        "foo(close)",
        "ts_mean(close, 2.5)",
        "(close",
        "close)",
    ] {
        assert!(parse(bad).is_err(), "{bad:?} should not parse");
    }
}

#[test]
fn rank_is_a_cross_sectional_percentile() {
    let mut rng = substream(3, "alpha/rank");
    let panel = random_panel(&mut rng, 5, 3);
    let g = evaluate_series(&parse("rank(close)").unwrap(), &panel);
    for day in 0..3 {
        let row = g.row(day);
        assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(row.iter().any(|v| *v == 1.0));
    }
}

#[test]
fn fixture_library_and_matrix() {
    let data = common::fixture_bundle();
    let book = DescriptionBook::parse(FIXTURE_DESCRIPTIONS).unwrap();
    let lib = parse_library(FIXTURE_LIBRARY, &book).unwrap();
    assert_eq!(lib.len(), 26);
    assert!(lib.iter().all(|r| !r.description.is_empty()));
    let rec26 = lib.iter().find(|r| r.id == 26).unwrap();
    assert!(rec26.description.starts_with("Measures how close the current closing price"));

    let dates = &data.panel.calendar()[60..65];
    let m = build_factor_matrix(&lib, &data.panel, dates).unwrap();
    assert_eq!(m.alpha_ids.len(), 26);
    for (di, date) in dates.iter().enumerate() {
        for (fi, rec) in lib.iter().enumerate() {
            let direct = evaluate(&rec.expression, &data.panel, *date).unwrap();
            for (ti, t) in m.tickers.iter().enumerate() {
                assert!(close_enough(m.get(di, ti, fi), direct[t], 1e-12), "factor {} {t} {date}", rec.id);
            }
        }
    }

    let out: CombineOutput = LinearZScoreCombiner::default().combine(&m.slice(dates[0]).unwrap());
    let t0 = &m.tickers[0];
    let contrib = &out.contributions[t0];
    let sum: f64 = contrib.iter().map(|(_, c)| c).sum();
    assert!(close_enough(sum, out.scores[t0], 1e-9));
    let top = top_k_contributors(contrib, 5);
    assert_eq!(top.len(), 5);
    assert!(top.windows(2).all(|w| w[0].1.abs() >= w[1].1.abs()));
}
