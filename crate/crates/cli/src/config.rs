//! Run configuration: a TOML manifest, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use mixtrade_core::backtest::StrategyConfig;
use mixtrade_core::experts::{ExpertKind, RemoteConfig};
use mixtrade_core::market::{DatasetSplit, DateRange};
use mixtrade_core::orchestrator::{DataPaths, PipelineConfig};
use serde::{Deserialize, Serialize};

/// A configuration problem, tagged with the dotted path of the offending
/// field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Directory with the standard file names; individual paths win.
    pub dir: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub news: Option<PathBuf>,
    pub fundamentals: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    /// Backend for the four specialists.
    pub specialists: BackendKind,
    /// Backend for both general-expert modes; scripted is not allowed.
    pub general: BackendKind,
    /// JSONL of scripted specialist responses.
    pub script: Option<PathBuf>,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Comparator sharpness; tuned on a pilot run when absent.
    pub beta: Option<f64>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { n: 30, k: 10, trials: 500, beta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub data: DataSection,
    pub split: DatasetSplit,
    pub pipeline: PipelineConfig,
    pub strategy: StrategyConfig,
    pub backend: BackendSection,
    pub ablation: AblationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: None,
            data: DataSection::default(),
            split: DatasetSplit::four_year_default(),
            pipeline: PipelineConfig::default(),
            strategy: StrategyConfig::default(),
            backend: BackendSection::default(),
            ablation: AblationSection::default(),
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub k: Option<usize>,
    pub disable: Vec<ExpertKind>,
    pub record_latency: bool,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            // the span covers the offending table header or key; report it as a dotted path
            let field = e
                .span()
                .map(|s| {
                    let line = text[s].lines().next().unwrap_or("").trim();
                    let key = line.split('=').next().unwrap_or("").trim();
                    key.trim_start_matches('[').trim_end_matches(']').trim().to_string()
                })
                .unwrap_or_default();
            ConfigError::new(if field.is_empty() { "config" } else { &field }, e.message().to_string())
        })
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [&mut d.dir, &mut d.panel, &mut d.news, &mut d.fundamentals, &mut d.library, &mut d.descriptions] {
            rebase(base, p);
        }
        rebase(base, &mut self.backend.script);
        if self.out.is_relative() {
            self.out = base.join(&self.out);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
        if let Some(k) = o.k {
            self.strategy.k = k;
        }
        for kind in &o.disable {
            self.pipeline = self.pipeline.without(*kind);
        }
        if o.record_latency {
            self.pipeline.record_latency = true;
        }
        self.pipeline.seed = self.seed;
    }

    /// Checks everything that does not need the data files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.strategy.k == 0 {
            return Err(ConfigError::new("strategy.k", "must be at least 1"));
        }
        self.strategy.validate().map_err(|e| ConfigError::new("strategy", e.to_string()))?;
        if self.jobs == Some(0) {
            return Err(ConfigError::new("jobs", "must be at least 1"));
        }
        self.pipeline.validate().map_err(|e| ConfigError::new("pipeline", e.to_string()))?;
        for (name, r) in [("split.train", self.split.train), ("split.valid", self.split.valid), ("split.test", self.split.test)] {
            DateRange::new(r.start, r.end).map_err(|e| ConfigError::new(name, e.to_string()))?;
        }
        DatasetSplit::new(self.split.train, self.split.valid, self.split.test)
            .map_err(|e| ConfigError::new("split", e.to_string()))?;
        let a = &self.ablation;
        if a.n < 2 || a.k == 0 || a.k > a.n || a.trials == 0 {
            return Err(ConfigError::new("ablation", "need n >= 2, 1 <= k <= n and trials >= 1"));
        }
        if a.beta.is_some_and(|b| !(b >= 0.0)) {
            return Err(ConfigError::new("ablation.beta", "must be non-negative"));
        }
        let b = &self.backend;
        if b.general == BackendKind::Scripted {
            return Err(ConfigError::new("backend.general", "scripted responses cover the specialists only"));
        }
        if b.specialists == BackendKind::Scripted && b.script.is_none() {
            return Err(ConfigError::new("backend.script", "required when specialists = \"scripted\""));
        }
        if (b.specialists == BackendKind::Remote || b.general == BackendKind::Remote) && b.remote.url.is_empty() {
            return Err(ConfigError::new("backend.remote.url", "required for the remote backend"));
        }
        Ok(())
    }

    /// Resolved input paths; each must exist.
    pub fn data_paths(&self, need_text_inputs: bool) -> Result<DataPaths, ConfigError> {
        let d = &self.data;
        let std_paths = d.dir.as_deref().map(DataPaths::in_dir);
        let pick = |field: &str, explicit: &Option<PathBuf>, fallback: Option<&PathBuf>| -> Result<PathBuf, ConfigError> {
            let p = explicit.clone().or_else(|| fallback.cloned()).ok_or_else(|| ConfigError::new(field, "no path given"))?;
            if !p.is_file() {
                return Err(ConfigError::new(field, format!("{} does not exist", p.display())));
            }
            Ok(p)
        };
        let panel = pick("data.panel", &d.panel, std_paths.as_ref().map(|s| &s.panel))?;
        let library = pick("data.library", &d.library, std_paths.as_ref().map(|s| &s.library))?;
        let (news, fundamentals) = if need_text_inputs {
            (
                pick("data.news", &d.news, std_paths.as_ref().map(|s| &s.news))?,
                pick("data.fundamentals", &d.fundamentals, std_paths.as_ref().map(|s| &s.fundamentals))?,
            )
        } else {
            (PathBuf::new(), PathBuf::new())
        };
        let descriptions = match (&d.descriptions, std_paths.as_ref().and_then(|s| s.descriptions.as_ref())) {
            (Some(p), _) => Some(pick("data.descriptions", &Some(p.clone()), None)?),
            (None, Some(p)) if p.is_file() => Some(p.clone()),
            _ => None,
        };
        Ok(DataPaths { panel, news, fundamentals, library, descriptions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("seed = 1\n[strategy]\nk = 3\nslippage = 0.1\n").unwrap_err();
        assert!(e.message.contains("slippage"), "{e}");
        assert!(RunConfig::from_toml("sede = 1").is_err());
    }

    #[test]
    fn flags_win_over_the_file() {
        let mut cfg = RunConfig::from_toml("seed = 1\n[strategy]\nk = 3\n").unwrap();
        cfg.apply(&Overrides { seed: Some(9), k: Some(5), disable: vec![ExpertKind::News], ..Default::default() });
        assert_eq!((cfg.seed, cfg.strategy.k, cfg.pipeline.seed), (9, 5, 9));
        assert!(!cfg.pipeline.is_enabled(ExpertKind::News));
    }

    #[test]
    fn zero_k_is_a_config_error() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides { k: Some(0), ..Default::default() });
        assert_eq!(cfg.validate().unwrap_err().field, "strategy.k");
    }

    #[test]
    fn missing_data_path_names_the_field() {
        let cfg = RunConfig { data: DataSection { dir: Some("/nonexistent".into()), ..Default::default() }, ..Default::default() };
        assert_eq!(cfg.data_paths(true).unwrap_err().field, "data.panel");
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = RunConfig::from_toml("out = \"o\"\n[data]\ndir = \"d\"\n").unwrap();
        cfg.rebase(Path::new("/base"));
        assert_eq!(cfg.data.dir.as_deref(), Some(Path::new("/base/d")));
        assert_eq!(cfg.out, Path::new("/base/o"));
    }
}
