mod common;

use std::collections::BTreeMap;

use mixtrade_core::backtest::{
    annualized_return, annualized_vol, compute_metrics, curve_from_returns, max_drawdown, run_topk, sharpe, MetricError,
    StrategyConfig,
};
use mixtrade_core::eval::{accuracy, mcc, ConfusionMatrix};
use mixtrade_core::market::DatasetSplit;
use mixtrade_core::oracle::{close_enough, mcc_from_definition, quadratic_max_drawdown, simulate_topk};
use mixtrade_core::seed::substream;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn returns() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.2f64..0.2, 2..300)
}

proptest! {
    #[test]
    fn drawdown_matches_pairwise_scan(r in returns()) {
        let curve = curve_from_returns(&r).unwrap();
        let md = max_drawdown(&curve).unwrap();
        prop_assert!(close_enough(md, quadratic_max_drawdown(&curve), 1e-12));
        prop_assert!((0.0..1.0).contains(&md));
    }

    #[test]
    fn return_and_vol_scale_as_documented(r in returns()) {
        let ar = annualized_return(&r).unwrap();
        let logs: f64 = r.iter().map(|x| x.ln_1p()).sum();
        prop_assert!(close_enough(ar, (logs * 252.0 / r.len() as f64).exp_m1(), 1e-9));
        // volatility ignores the mean
        let av = annualized_vol(&r).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + 0.01).collect();
        prop_assert!(close_enough(av, annualized_vol(&shifted).unwrap(), 1e-9));
        if av > 0.0 {
            prop_assert!(close_enough(sharpe(ar, av, 0.0).unwrap() * av, ar, 1e-12));
        }
    }

    #[test]
    fn mcc_agrees_with_pearson(tp in 0u64..200, tn in 0u64..200, fp in 0u64..200, fn_ in 0u64..200) {
        let cm = ConfusionMatrix { tp, tn, fp, fn_ };
        if cm.total() == 0 {
            prop_assert!(mcc(&cm).is_err());
        } else {
            let m = mcc(&cm).unwrap();
            prop_assert!(close_enough(m, mcc_from_definition(tp, tn, fp, fn_), 1e-9));
            prop_assert!((-1.0..=1.0).contains(&m));
            // swapping the classes leaves MCC unchanged
            let swapped = ConfusionMatrix { tp: tn, tn: tp, fp: fn_, fn_: fp };
            prop_assert!(close_enough(m, mcc(&swapped).unwrap(), 1e-12));
            prop_assert!(close_enough(accuracy(&cm).unwrap(), (tp + tn) as f64 / cm.total() as f64, 1e-15));
        }
    }
}

#[test]
fn worked_examples() {
    let cm = ConfusionMatrix { tp: 32, tn: 28, fp: 22, fn_: 18 };
    assert!((accuracy(&cm).unwrap() - 0.60).abs() < 1e-12);
    let want = (32.0 * 28.0 - 22.0 * 18.0) / ((54.0f64) * 50.0 * 50.0 * 46.0).sqrt();
    assert!((mcc(&cm).unwrap() - want).abs() < 1e-12);
    assert_eq!(mcc(&ConfusionMatrix { tp: 10, tn: 0, fp: 5, fn_: 0 }).unwrap(), 0.0);
    assert!(close_enough(max_drawdown(&[1.0, 1.2, 0.9, 1.5, 1.2]).unwrap(), 0.25, 1e-15));
    assert_eq!(sharpe(0.1, 0.0, 0.0), Err(MetricError::ZeroVolatility));
    assert_eq!(annualized_vol(&[0.01; 10]).unwrap(), 0.0);
    assert!(compute_metrics(&[0.01; 10]).unwrap().sharpe.is_none());
    assert!(matches!(annualized_return(&[0.1, -1.0]), Err(MetricError::InvalidReturn { index: 1, .. })));
}

#[test]
fn topk_backtest_matches_day_by_day_simulation() {
    let data = common::fixture_bundle();
    let test = data.panel.slice_dates(&DatasetSplit::four_year_default().test).unwrap();
    let dates = test.calendar().to_vec();
    let mut rng = substream(1, "metrics/rankings");
    let rankings: BTreeMap<_, _> = dates
        .iter()
        .map(|d| {
            let mut order = data.panel.tickers().to_vec();
            order.shuffle(&mut rng);
            (*d, order)
        })
        .collect();
    for (k, cost) in [(1, 0.0), (3, 0.0), (5, 0.001), (30, 0.002)] {
        let cfg = StrategyConfig { k, cost_rate: cost, initial_capital: 1.0 };
        let res = run_topk(&data.panel, &rankings, &dates, &cfg).unwrap();
        let want = simulate_topk(&data.panel, &rankings, &dates, k, cost);
        assert_eq!(res.curve.len(), want.len());
        for (a, b) in res.curve.iter().zip(&want) {
            assert!(close_enough(*a, *b, 1e-9), "k={k}: {a} vs {b}");
        }
        assert!(res.holdings.iter().all(|h| h.len() == k));
    }
    let bad = StrategyConfig { k: 0, ..Default::default() };
    assert!(run_topk(&data.panel, &rankings, &dates, &bad).is_err());
}
