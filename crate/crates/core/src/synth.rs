//! Seeded synthetic market: OHLCV panel, news articles and quarterly
//! fundamentals that carry a weak, learnable signal.
//!
//! Each ticker has a persistent latent state `s` (AR(1)). Tomorrow's return
//! loads on today's state, the day's news tone is a noisy read of it, and
//! quarterly EPS growth tracks the ticker's drift. This is what the bundled
//! fixture year is built from.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::market::{MarketError, OhlcvBar, OhlcvPanel};
use crate::orchestrator::{FundamentalRecord, NewsArticle};
use crate::seed::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub tickers: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub seed: u64,
    /// Chance of an article on a given day; gaps never exceed two days.
    pub news_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            tickers: 30,
            start: NaiveDate::from_ymd_opt(2022, 10, 3).expect("date"),
            end: NaiveDate::from_ymd_opt(2023, 12, 29).expect("date"),
            seed: 7,
            news_rate: 0.7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub panel: OhlcvPanel,
    pub news: Vec<NewsArticle>,
    pub fundamentals: Vec<FundamentalRecord>,
}

/// Weekdays from `start` to `end` inclusive. No holiday calendar.
pub fn business_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

pub fn ticker_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("T{i:02}")).collect()
}

const POSITIVE: &[&str] = &[
    "{T} posted robust quarterly demand and analysts see upside.",
    "Shares of {T} rally after an upgrade from a major broker.",
    "{T} reports record orders and strong growth in services.",
];
const NEGATIVE: &[&str] = &[
    "{T} faces a lawsuit over product defects.",
    "Analysts downgrade {T} on weak margins.",
    "{T} shares slump as investors weigh a profit warning.",
];
const NEUTRAL: &[&str] = &[
    "{T} will present at an industry conference next week.",
    "{T} announced a change to its board of directors.",
    "{T} confirmed the date of its annual shareholder meeting.",
];

fn pick<'a>(pool: &[&'a str], rng: &mut impl Rng) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

struct Ticker {
    name: String,
    drift: f64,
    beta: f64,
    vol: f64,
    price: f64,
    base_volume: f64,
}

/// Return loading on yesterday's latent state.
const SIGNAL_LOADING: f64 = 0.004;

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, MarketError> {
    let days = business_days(cfg.start, cfg.end);
    let names = ticker_names(cfg.tickers);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut mrng = substream(cfg.seed, "synth/market");
    let market: Vec<f64> = days.iter().map(|_| 0.0004 + 0.009 * unit.sample(&mut mrng)).collect();

    let mut rows = Vec::new();
    let mut news = Vec::new();
    let mut fundamentals = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let mut prng = substream(cfg.seed, &format!("synth/{name}/profile"));
        let mut tk = Ticker {
            name: name.clone(),
            drift: 0.0003 * unit.sample(&mut prng),
            beta: prng.random_range(0.6..1.4),
            vol: prng.random_range(0.008..0.02),
            price: prng.random_range(20.0..300.0),
            base_volume: prng.random_range(1.0e6..5.0e7_f64).ln(),
        };

        let mut rng = substream(cfg.seed, &format!("synth/{name}/prices"));
        let mut nrng = substream(cfg.seed, &format!("synth/{name}/news"));
        let mut state = 0.0;
        let mut since_article = 0;
        for (t, &date) in days.iter().enumerate() {
            let r = tk.drift + tk.beta * market[t] + SIGNAL_LOADING * state + tk.vol * unit.sample(&mut rng);
            let open = r2(tk.price * (0.3 * tk.vol * unit.sample(&mut rng)).exp());
            let close = r2(tk.price * r.exp());
            let hi = r2(open.max(close) * (1.0 + (0.5 * tk.vol * unit.sample(&mut rng)).abs())).max(open.max(close));
            let lo = r2(open.min(close) * (1.0 - (0.5 * tk.vol * unit.sample(&mut rng)).abs())).min(open.min(close));
            let volume = ((tk.base_volume + 0.3 * unit.sample(&mut rng)).exp() * (1.0 + 20.0 * r.abs())).round();
            rows.push((tk.name.clone(), OhlcvBar { date, open, high: hi, low: lo.max(0.01), close, volume }));
            tk.price = close;

            // today's state drives tomorrow's return and today's headline
            state = 0.5 * state + unit.sample(&mut rng);
            since_article += 1;
            if nrng.random::<f64>() < cfg.news_rate || since_article >= 3 {
                since_article = 0;
                let tone = state + 0.7 * unit.sample(&mut nrng);
                let mut parts = vec![pick(NEUTRAL, &mut nrng)];
                if tone > 0.3 {
                    parts.push(pick(POSITIVE, &mut nrng));
                } else if tone < -0.3 {
                    parts.push(pick(NEGATIVE, &mut nrng));
                }
                if nrng.random::<f64>() < 0.5 {
                    parts.reverse();
                }
                let text = parts.join(" ").replace("{T}", &tk.name);
                news.push(NewsArticle { ticker: tk.name.clone(), date, text });
            }
        }

        let mut frng = substream(cfg.seed, &format!("synth/{name}/fundamentals"));
        let first_year = cfg.start.year() - 1;
        for year in first_year..=cfg.end.year() {
            for month in [2, 5, 8, 11] {
                let date = NaiveDate::from_ymd_opt(year, month, 1).expect("quarter date") + Duration::days((i % 20) as i64);
                if date > cfg.end || date < cfg.start - Duration::days(120) {
                    continue;
                }
                let growth = 100.0 * (63.0 * tk.drift + 0.04 * unit.sample(&mut frng));
                let revenue = frng.random_range(2.0..90.0);
                let eps = frng.random_range(0.2..4.0);
                let outlook = if growth >= 0.0 { "continued growth" } else { "softer demand" };
                fundamentals.push(FundamentalRecord {
                    ticker: tk.name.clone(),
                    date,
                    summary: format!(
                        "{} reported quarterly revenue of ${revenue:.2} billion and diluted EPS of ${eps:.2}. \
                         Management expects {outlook} in the coming quarter.",
                        tk.name
                    ),
                    metrics: [
                        ("EPS Growth".to_string(), format!("{growth:.1}%")),
                        ("Revenue Growth".to_string(), format!("{:.1}%", growth * 0.6 + 2.0 * unit.sample(&mut frng))),
                    ]
                    .into_iter()
                    .collect(),
                });
            }
        }
    }
    fundamentals.sort_by(|a, b| (a.date, &a.ticker).cmp(&(b.date, &b.ticker)));
    news.sort_by(|a, b| (a.date, &a.ticker).cmp(&(b.date, &b.ticker)));
    Ok(SynthData { panel: OhlcvPanel::from_bars(rows)?, news, fundamentals })
}

/// Factor library shipped with the fixture: `id<TAB>expression`.
pub const FIXTURE_LIBRARY: &str = "\
# id\texpression
1\trank(ts_argmax(corr(ts_rank(close, 10), ts_rank(volume, 10), 10), 5))
2\t-1 * delta(close, 5)
3\t-1 * corr(rank(open), rank(volume), 10)
4\t(close - open) / (high - low + 0.001)
5\t1 * (close - vwap) / decay_linear(rank(ts_argmax(close, 30)), 2)
6\t-1 * ts_rank(abs(delta(close, 1)), 10)
7\trank(volume / adv20)
8\t-1 * stddev(close / vwap, 10)
9\tts_mean(close, 5) / ts_mean(close, 20) - 1
10\t-1 * rank(delta(log(volume), 2))
11\t(ts_max(high, 10) - close) / close
12\trank(close - ts_min(low, 15))
13\t-1 * ts_argmin(close, 20)
14\tdecay_linear(delta(close, 1), 10)
15\tcorr(close, volume, 20)
16\t-1 * rank(stddev(abs(delta(close, 1)), 20))
17\tts_sum(delta(close, 1), 10) / ts_sum(abs(delta(close, 1)), 10)
18\trank(vwap - close)
19\t(high + low) / 2 - close
20\tts_rank(volume, 20) * -1
21\trank(ts_mean(volume, 5) / adv30)
22\tdelta(ts_mean(close, 10), 5)
25\t1 * ts_rank(correlation(rank(high), rank(volume), 5), 5)
26\t1 * (close - ts_min(close, 30)) / (ts_max(close, 30) - ts_min(close, 30))
27\t1 * ts_rank(correlation(rank(low), rank(adv15), 9), 15)
29\t1 * ts_rank(stddev(high, 10), 5)
";

/// Hand-written descriptions keyed by expression: `expression<TAB>text`.
pub const FIXTURE_DESCRIPTIONS: &str = "\
1 * (close - ts_min(close, 30)) / (ts_max(close, 30) - ts_min(close, 30))\tMeasures how close the current closing price is to the minimum and maximum close in the last 30 days.
1 * (close - vwap) / decay_linear(rank(ts_argmax(close, 30)), 2)\tEvaluates the deviation of the closing price from the VWAP, adjusted by a decayed rank.
1 * ts_rank(stddev(high, 10), 5)\tRanks the standard deviation of the high prices over the last 10 days.
1 * ts_rank(correlation(rank(low), rank(adv15), 9), 15)\tRanks the correlation between the low price and a 15-day average volume rank.
1 * ts_rank(correlation(rank(high), rank(volume), 5), 5)\tRanks the correlation between the high price and volume over the last 5 days.
";

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes `panel.csv`, `news.jsonl`, `fundamentals.jsonl`, `alphas.tsv` and
/// `alpha_descriptions.tsv` into `dir`.
pub fn write_fixture_set(dir: &Path, cfg: &SynthConfig) -> Result<(), MarketError> {
    std::fs::create_dir_all(dir)?;
    let data = generate(cfg)?;
    let f = std::fs::File::create(dir.join("panel.csv"))?;
    data.panel.write_csv(std::io::BufWriter::new(f))?;
    write_jsonl(&dir.join("news.jsonl"), &data.news)?;
    write_jsonl(&dir.join("fundamentals.jsonl"), &data.fundamentals)?;
    std::fs::write(dir.join("alphas.tsv"), FIXTURE_LIBRARY)?;
    std::fs::write(dir.join("alpha_descriptions.tsv"), FIXTURE_DESCRIPTIONS)?;
    Ok(())
}
