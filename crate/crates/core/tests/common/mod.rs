#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use chrono::NaiveDate;
use mixtrade_core::alpha::LinearZScoreCombiner;
use mixtrade_core::orchestrator::{DataBundle, DataPaths, MarketModel};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

pub fn fixture_bundle() -> &'static DataBundle {
    static B: OnceLock<DataBundle> = OnceLock::new();
    B.get_or_init(|| {
        let market = MarketModel::default_seeded(0).unwrap();
        DataBundle::load(&DataPaths::in_dir(&fixture_dir()), &LinearZScoreCombiner::default(), market).unwrap()
    })
}

pub fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}
