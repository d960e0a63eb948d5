pub mod alpha;
pub mod backtest;
pub mod eval;
pub mod experts;
pub mod market;
pub mod oracle;
pub mod orchestrator;
pub mod ranking;
pub mod reprogram;
pub mod seed;
pub mod selftest;
pub mod stats;
pub mod synth;
