//! The bundled fixture set is exactly what the generator produces.

use std::path::PathBuf;

use mixtrade_core::synth::{write_fixture_set, SynthConfig};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

const FILES: [&str; 5] = ["panel.csv", "news.jsonl", "fundamentals.jsonl", "alphas.tsv", "alpha_descriptions.tsv"];

#[test]
fn bundled_fixture_matches_generator() {
    if std::env::var_os("MIXTRADE_REGEN_FIXTURES").is_some() {
        write_fixture_set(&fixture_dir(), &SynthConfig::default()).unwrap();
    }
    let tmp = tempfile::tempdir().unwrap();
    write_fixture_set(tmp.path(), &SynthConfig::default()).unwrap();
    for f in FILES {
        let fresh = std::fs::read(tmp.path().join(f)).unwrap();
        let bundled = std::fs::read(fixture_dir().join(f))
            .unwrap_or_else(|e| panic!("{f}: {e}; regenerate with MIXTRADE_REGEN_FIXTURES=1"));
        assert!(fresh == bundled, "{f} differs from the generator output");
    }
}
