//! `mixtrade`: batch entry point for data checks, factor evaluation,
//! prediction, ranking backtests, the sorting ablation and the self-test.
//!
//! Every command reads one TOML run config (flags win), writes its outputs
//! under `--out`, and reports failures as one JSON object on stderr.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use mixtrade_core::alpha::{build_factor_matrix, load_library, top_k_contributors, DescriptionBook, FactorCombiner, LinearZScoreCombiner};
use mixtrade_core::backtest::run_topk;
use mixtrade_core::eval::{score_predictions, MetricsReport};
use mixtrade_core::experts::{ExpertBackend, ExpertKind, MockBackend, RemoteBackend, ScriptedBackend};
use mixtrade_core::market::{load_panel, movement_label, DateRange, MovementLabel, OhlcvPanel};
use mixtrade_core::orchestrator::{BackendSet, CallRecord, DataBundle, MarketModel, Pipeline};
use mixtrade_core::ranking::{rank_ic, rank_icir, simulate_ablation, write_ablation_csv, NoisyComparatorModel, SortAlgorithm};
use mixtrade_core::seed::substream_seed;
use mixtrade_core::selftest;
use rayon::prelude::*;
use serde::Serialize;

use config::{BackendKind, ConfigError, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mixtrade", version, about = "Mixture-of-experts stock prediction and ranking harness")]
struct Cli {
    /// TOML run config; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, which also bounds concurrent backend calls.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Holdings per day in the backtest.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Leave an expert out (news, market, alpha, fundamental); repeatable.
    #[arg(long, global = true, value_parser = parse_expert)]
    disable: Vec<ExpertKind>,
    /// Record wall-clock latency in call logs (makes logs non-reproducible).
    #[arg(long, global = true)]
    record_latency: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the OHLCV panel and report the chronological split.
    Ingest,
    /// Evaluate the factor library over the test split and list top contributors.
    Alpha,
    /// Rise/Fall prediction for every ticker and test day, with Acc and MCC.
    Predict {
        /// Restrict to these tickers.
        #[arg(long, value_delimiter = ',')]
        tickers: Vec<String>,
    },
    /// Rank all tickers every test day and hold the Top-K.
    Backtest,
    /// Compare relaxed, bubble and quick sorting under a noisy comparator.
    AblateRank,
    /// Run the built-in oracle checks.
    Selftest,
}

fn parse_expert(s: &str) -> Result<ExpertKind, String> {
    ExpertKind::parse(s)
        .filter(|k| k.is_specialist())
        .ok_or_else(|| format!("unknown expert {s:?}; expected news, market, alpha or fundamental"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = match e.downcast_ref::<ConfigError>() {
                Some(c) => serde_json::json!({ "error": "config", "field": c.field, "message": c.message }),
                None => {
                    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
                    serde_json::json!({ "error": "runtime", "message": chain.join(": ") })
                }
            };
            let code = if e.is::<ConfigError>() { 2 } else { 1 };
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        jobs: cli.jobs,
        k: cli.k,
        disable: cli.disable.clone(),
        record_latency: cli.record_latency,
    });
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        cfg.backend.remote.max_in_flight = j;
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("starting the worker pool")?;
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    match cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Alpha => alpha(&cfg),
        Command::Predict { tickers } => predict(&cfg, &tickers),
        Command::Backtest => backtest(&cfg),
        Command::AblateRank => ablate_rank(&cfg),
        Command::Selftest => run_selftest(&cfg),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_calls(dir: &Path, calls: &[CallRecord]) -> Result<()> {
    let mut w = create(dir, "calls.jsonl")?;
    for c in calls {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn days_in(panel: &OhlcvPanel, r: &DateRange) -> Vec<NaiveDate> {
    panel.calendar().iter().copied().filter(|d| r.contains(*d)).collect()
}

#[derive(Serialize)]
struct SplitReport {
    range: DateRange,
    trading_days: usize,
}

#[derive(Serialize)]
struct IngestReport {
    tickers: usize,
    trading_days: usize,
    bars: usize,
    first: Option<NaiveDate>,
    last: Option<NaiveDate>,
    splits: BTreeMap<&'static str, SplitReport>,
    warnings: Vec<String>,
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let paths = cfg.data_paths(false)?;
    let panel = load_panel(&paths.panel).with_context(|| format!("loading {}", paths.panel.display()))?;
    let mut warnings = Vec::new();
    let mut splits = BTreeMap::new();
    for (name, r) in [("train", cfg.split.train), ("valid", cfg.split.valid), ("test", cfg.split.test)] {
        let n = days_in(&panel, &r).len();
        if n == 0 {
            warnings.push(format!("{name} split {r} has no trading days"));
        }
        splits.insert(name, SplitReport { range: r, trading_days: n });
    }
    let report = IngestReport {
        tickers: panel.tickers().len(),
        trading_days: panel.len(),
        bars: panel.bar_count(),
        first: panel.calendar().first().copied(),
        last: panel.calendar().last().copied(),
        splits,
        warnings,
    };
    write_json(&cfg.out, "ingest.json", &report)?;
    println!(
        "{} tickers, {} trading days, {} bars; test split has {} days",
        report.tickers, report.trading_days, report.bars, report.splits["test"].trading_days
    );
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn alpha(cfg: &RunConfig) -> Result<()> {
    let paths = cfg.data_paths(false)?;
    let panel = load_panel(&paths.panel).with_context(|| format!("loading {}", paths.panel.display()))?;
    let book = match &paths.descriptions {
        Some(p) => DescriptionBook::load(p).map_err(anyhow::Error::msg)?,
        None => DescriptionBook::default(),
    };
    let library = load_library(&paths.library, &book).with_context(|| format!("loading {}", paths.library.display()))?;
    let dates = days_in(&panel, &cfg.split.test);
    if dates.is_empty() {
        bail!(ConfigError::new("split.test", "no trading days in the panel"));
    }
    let matrix = build_factor_matrix(&library, &panel, &dates)?;
    matrix.write_csv(create(&cfg.out, "factors.csv")?)?;

    let combiner = LinearZScoreCombiner::default();
    let mut w = csv::Writer::from_writer(create(&cfg.out, "contributors.csv")?);
    w.write_record(["date", "ticker", "score", "rank", "alpha_id", "contribution"])?;
    for date in &dates {
        let out = combiner.combine(&matrix.slice(*date).expect("date in matrix"));
        for (t, contrib) in &out.contributions {
            for (rank, (id, c)) in top_k_contributors(contrib, cfg.pipeline.alpha_top_k).iter().enumerate() {
                w.write_record([date.to_string(), t.clone(), out.scores[t].to_string(), (rank + 1).to_string(), id.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    println!("{} factors x {} tickers x {} days", library.len(), panel.tickers().len(), dates.len());
    Ok(())
}

fn load_bundle(cfg: &RunConfig) -> Result<DataBundle> {
    let paths = cfg.data_paths(true)?;
    let market = MarketModel::default_seeded(substream_seed(cfg.seed, "market"))?;
    Ok(DataBundle::load(&paths, &LinearZScoreCombiner::default(), market)?)
}

fn backend(kind: BackendKind, cfg: &RunConfig) -> Result<Arc<dyn ExpertBackend>> {
    Ok(match kind {
        BackendKind::Mock => Arc::new(MockBackend),
        BackendKind::Scripted => {
            let p = cfg.backend.script.as_ref().expect("validated");
            Arc::new(ScriptedBackend::load(p).with_context(|| format!("loading {}", p.display()))?)
        }
        BackendKind::Remote => Arc::new(RemoteBackend::new(cfg.backend.remote.clone())?),
    })
}

fn backends(cfg: &RunConfig) -> Result<BackendSet> {
    let general = backend(cfg.backend.general, cfg)?;
    let set = BackendSet::uniform(backend(cfg.backend.specialists, cfg)?)
        .with(ExpertKind::GeneralPredict, general.clone())
        .with(ExpertKind::GeneralCompare, general);
    Ok(set)
}

#[derive(Serialize)]
struct PredictSummary {
    ablation: String,
    horizon: u32,
    predictions: usize,
    metrics: MetricsReport,
}

fn predict(cfg: &RunConfig, only: &[String]) -> Result<()> {
    let data = load_bundle(cfg)?;
    let set = backends(cfg)?;
    let pipeline = Pipeline::new(&cfg.pipeline, &data, &set)?;
    let tickers: Vec<String> = if only.is_empty() {
        data.panel.tickers().to_vec()
    } else {
        for t in only {
            data.panel.ticker_index(t).map_err(|_| ConfigError::new("tickers", format!("{t} is not in the panel")))?;
        }
        only.to_vec()
    };
    let h = cfg.pipeline.horizon as usize;
    // the last days of the split have no realised label yet
    let dates: Vec<NaiveDate> = days_in(&data.panel, &cfg.split.test)
        .into_iter()
        .filter(|d| data.panel.date_index(*d).map(|i| i + h < data.panel.len()).unwrap_or(false))
        .collect();
    if dates.is_empty() {
        bail!(ConfigError::new("split.test", "no test day has a realised label"));
    }

    // tickers in parallel, days in order within a ticker, so quarterly
    // caching and the log are independent of scheduling
    let per_ticker: Vec<Result<Vec<_>>> = tickers
        .par_iter()
        .map(|t| {
            dates
                .iter()
                .map(|d| {
                    let out = pipeline.run_prediction(t, *d)?;
                    let label = movement_label(&data.panel, t, *d, h)?;
                    Ok((t.clone(), *d, out, label))
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for r in per_ticker {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));

    let mut w = csv::Writer::from_writer(create(&cfg.out, "predictions.csv")?);
    let mut header = vec!["date".to_string(), "ticker".into(), "prediction".into(), "label".into()];
    header.extend(cfg.pipeline.enabled.iter().map(|k| k.as_str().to_string()));
    w.write_record(&header)?;
    let mut calls = Vec::new();
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for (t, d, out, label) in &rows {
        let p = out.general.prediction.movement().unwrap_or(MovementLabel::Fall);
        let mut rec = vec![d.to_string(), t.clone(), p.to_string(), label.to_string()];
        rec.extend(out.experts.iter().map(|e| e.prediction.label()));
        w.write_record(&rec)?;
        labels.push(*label);
        preds.push(p);
        calls.extend(out.calls.iter().cloned());
    }
    w.flush()?;
    write_calls(&cfg.out, &calls)?;
    let metrics = MetricsReport::from_counts(score_predictions(&labels, &preds)?)?;
    let summary = PredictSummary { ablation: cfg.pipeline.ablation_label(), horizon: cfg.pipeline.horizon, predictions: rows.len(), metrics };
    write_json(&cfg.out, "metrics.json", &summary)?;
    println!(
        "{} predictions ({}): accuracy {:.4}, MCC {:.4}",
        summary.predictions, summary.ablation, metrics.accuracy, metrics.mcc
    );
    Ok(())
}

#[derive(Serialize)]
struct BacktestSummary {
    ablation: String,
    k: usize,
    days: usize,
    comparisons: usize,
    fallbacks: usize,
    skipped: usize,
    mean_rank_ic: Option<f64>,
    rank_icir: Option<f64>,
    metrics: mixtrade_core::backtest::PerformanceMetrics,
    final_value: f64,
}

fn backtest(cfg: &RunConfig) -> Result<()> {
    let data = load_bundle(cfg)?;
    let set = backends(cfg)?;
    let pipeline = Pipeline::new(&cfg.pipeline, &data, &set)?;
    let dates = days_in(&data.panel, &cfg.split.test);
    if dates.len() < 2 {
        bail!(ConfigError::new("split.test", "needs at least two trading days"));
    }
    let tickers = data.panel.tickers().to_vec();
    let mut rankings = BTreeMap::new();
    let mut calls = Vec::new();
    let mut ics = Vec::new();
    let (mut comparisons, mut fallbacks, mut skipped) = (0, 0, 0);
    let mut w = csv::Writer::from_writer(create(&cfg.out, "rankings.csv")?);
    w.write_record(["date", "rank", "ticker", "wins"])?;
    for pair in dates.windows(2) {
        let (day, next) = (pair[0], pair[1]);
        let r = pipeline.run_ranking_day(&tickers, day, cfg.strategy.k)?;
        for (i, t) in r.ranked.order.iter().enumerate() {
            w.write_record([day.to_string(), (i + 1).to_string(), t.clone(), r.ranked.table.get(t).to_string()])?;
        }
        let realized: BTreeMap<String, f64> = r
            .ranked
            .order
            .iter()
            .map(|t| Ok((t.clone(), data.panel.bar(t, next)?.close / data.panel.bar(t, day)?.close - 1.0)))
            .collect::<Result<_>>()?;
        if let Ok(ic) = rank_ic(&r.ranked.order, &realized) {
            ics.push(ic);
        }
        comparisons += r.comparisons;
        fallbacks += r.fallbacks;
        skipped += r.skipped.len();
        calls.extend(r.calls);
        rankings.insert(day, r.ranked.order);
    }
    w.flush()?;
    let result = run_topk(&data.panel, &rankings, &dates, &cfg.strategy)?;
    result.write_curve_csv(create(&cfg.out, "curve.csv")?)?;
    write_calls(&cfg.out, &calls)?;
    let summary = BacktestSummary {
        ablation: cfg.pipeline.ablation_label(),
        k: cfg.strategy.k,
        days: result.returns.len(),
        comparisons,
        fallbacks,
        skipped,
        mean_rank_ic: (!ics.is_empty()).then(|| ics.iter().sum::<f64>() / ics.len() as f64),
        rank_icir: rank_icir(&ics).ok(),
        metrics: result.metrics,
        final_value: *result.curve.last().expect("non-empty curve") * cfg.strategy.initial_capital,
    };
    write_json(&cfg.out, "metrics.json", &summary)?;
    let m = &summary.metrics;
    println!(
        "{} over {} days, K={}: AR {:.2}%, AV {:.2}%, SR {}, MD {:.2}%, RankIC {}",
        summary.ablation,
        summary.days,
        summary.k,
        100.0 * m.annualized_return,
        100.0 * m.annualized_volatility,
        m.sharpe.map_or("n/a".to_string(), |s| format!("{s:.2}")),
        100.0 * m.max_drawdown,
        summary.mean_rank_ic.map_or("n/a".to_string(), |x| format!("{x:.4}")),
    );
    Ok(())
}

fn ablate_rank(cfg: &RunConfig) -> Result<()> {
    let a = &cfg.ablation;
    let beta = match a.beta {
        Some(b) => b,
        None => {
            let (b, ic) = selftest::tune_beta(cfg.seed);
            log::info!("tuned beta = {b} (pilot relaxed RankIC {ic:.3})");
            b
        }
    };
    let model = NoisyComparatorModel { beta, seed: substream_seed(cfg.seed, "ablate-rank") };
    let rows = simulate_ablation(&model, a.n, a.k, a.trials, &SortAlgorithm::ALL)?;
    write_ablation_csv(&rows, create(&cfg.out, "ablation.csv")?)?;
    for r in &rows {
        println!("{:<8} RankIC {:.4}  ICIR {:.4}  calls {:.1}", r.algorithm.name(), r.mean_rank_ic, r.mean_rank_icir, r.mean_calls);
    }
    Ok(())
}

#[derive(Serialize)]
struct SelftestLine {
    name: String,
    passed: bool,
    detail: String,
}

fn run_selftest(cfg: &RunConfig) -> Result<()> {
    let checks = selftest::run_all(cfg.seed);
    for c in &checks {
        println!("{c}");
    }
    let lines: Vec<SelftestLine> =
        checks.iter().map(|c| SelftestLine { name: c.name.clone(), passed: c.passed, detail: c.detail.clone() }).collect();
    write_json(&cfg.out, "selftest.json", &lines)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        bail!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "));
    }
    Ok(())
}
