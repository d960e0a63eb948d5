//! Time-series reprogramming: instance-normalised OHLCV patches attend over a
//! small bank of text prototypes and are projected to the language model's
//! hidden size.
//!
//! Only the forward pass exists. Every learnable matrix is a seeded random
//! constant drawn from N(0, 1/fan_in).

use std::io::Write;

use ndarray::{s, Array2, Array3, Array4, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed::substream;

#[derive(Debug, Error, PartialEq)]
pub enum ReprogramError {
    #[error("degenerate patch configuration: {0}")]
    DegenerateConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid prototype count {v_prime} for vocabulary of {vocab}")]
    InvalidSize { v_prime: usize, vocab: usize },
    #[error("non-finite input value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub n_vars: usize,
    pub window: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_k: usize,
    pub d_llm: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { n_vars: 5, window: 20, patch_len: 5, stride: 5, d_model: 64, heads: 4, d_k: 16, d_llm: 128 }
    }
}

impl PatchConfig {
    /// Number of patches, or 0 when the configuration cannot produce any.
    pub fn num_patches(&self) -> usize {
        if self.stride == 0 || self.patch_len == 0 || self.patch_len > self.window {
            return 0;
        }
        (self.window - self.patch_len) / self.stride + 1
    }

    pub fn validate(&self) -> Result<(), ReprogramError> {
        let bad = |m: String| Err(ReprogramError::DegenerateConfig(m));
        if self.n_vars == 0 || self.window == 0 {
            return bad("n_vars and window must be positive".into());
        }
        if self.num_patches() < 1 {
            return bad(format!(
                "patch_len {} and stride {} give no patch over window {}",
                self.patch_len, self.stride, self.window
            ));
        }
        if self.heads == 0 || self.d_k == 0 || self.d_model != self.heads * self.d_k {
            return bad(format!("d_model {} != heads {} x d_k {}", self.d_model, self.heads, self.d_k));
        }
        if self.d_llm == 0 {
            return bad("d_llm must be positive".into());
        }
        Ok(())
    }
}

/// Text prototypes `E' = probe . E` built from a vocabulary embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    pub e_prime: Array2<f64>,
    pub probe: Array2<f64>,
    pub vocab_size: usize,
}

impl PrototypeBank {
    pub fn from_probe(probe: Array2<f64>, vocab: ArrayView2<f64>) -> Result<Self, ReprogramError> {
        let (v_prime, v) = probe.dim();
        if v != vocab.nrows() {
            return Err(ReprogramError::DimensionMismatch(format!(
                "probe has {v} columns, vocabulary has {} rows",
                vocab.nrows()
            )));
        }
        if v_prime == 0 || v_prime >= v {
            return Err(ReprogramError::InvalidSize { v_prime, vocab: v });
        }
        let e_prime = probe.dot(&vocab);
        if e_prime.iter().any(|x| !x.is_finite()) {
            return Err(ReprogramError::NonFinite);
        }
        Ok(Self { e_prime, probe, vocab_size: v })
    }

    pub fn v_prime(&self) -> usize {
        self.e_prime.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.e_prime.ncols()
    }
}

/// Seeded probe with non-negative rows that sum to one.
pub fn build_prototype_bank(vocab: ArrayView2<f64>, v_prime: usize, seed: u64) -> Result<PrototypeBank, ReprogramError> {
    let v = vocab.nrows();
    if v_prime == 0 || v_prime >= v {
        return Err(ReprogramError::InvalidSize { v_prime, vocab: v });
    }
    let mut rng = substream(seed, "reprogram/probe");
    let mut probe = Array2::from_shape_fn((v_prime, v), |_| rng.random::<f64>());
    for mut row in probe.rows_mut() {
        let total: f64 = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    PrototypeBank::from_probe(probe, vocab)
}

/// Stand-in vocabulary embedding with standard normal entries.
pub fn synthetic_vocab(vocab_size: usize, embed_dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = substream(seed, "reprogram/vocab");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Array2::from_shape_fn((vocab_size, embed_dim), |_| normal.sample(&mut rng))
}

/// Seeded projection matrices. Shapes: `patch_proj` patch_len x d_model;
/// `w_q` d_model x d_model; `w_k`, `w_v` embed_dim x d_model; `w_out`
/// d_model x d_llm. Head `h` owns columns `h*d_k .. (h+1)*d_k` of the
/// query, key and value projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprogramWeights {
    pub patch_proj: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_out: Array2<f64>,
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, (1.0 / rows as f64).sqrt()).expect("positive std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

impl ReprogramWeights {
    pub fn seeded(cfg: &PatchConfig, embed_dim: usize, seed: u64) -> Result<Self, ReprogramError> {
        cfg.validate()?;
        if embed_dim == 0 {
            return Err(ReprogramError::DegenerateConfig("embedding dimension must be positive".into()));
        }
        Ok(Self {
            patch_proj: gaussian(cfg.patch_len, cfg.d_model, &mut substream(seed, "reprogram/patch_proj")),
            w_q: gaussian(cfg.d_model, cfg.d_model, &mut substream(seed, "reprogram/w_q")),
            w_k: gaussian(embed_dim, cfg.d_model, &mut substream(seed, "reprogram/w_k")),
            w_v: gaussian(embed_dim, cfg.d_model, &mut substream(seed, "reprogram/w_v")),
            w_out: gaussian(cfg.d_model, cfg.d_llm, &mut substream(seed, "reprogram/w_out")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReprogrammedEmbedding {
    /// `n_vars x num_patches x d_llm`.
    pub output: Array3<f64>,
    /// `heads x n_vars x num_patches x v_prime`.
    pub attention: Array4<f64>,
}

impl ReprogrammedEmbedding {
    /// SHA-256 over the output's bit patterns, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for d in self.output.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        for x in self.output.iter() {
            h.update(x.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Shape header `N,L_P,D_llm` then one row per (variable, patch).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (n, lp, d) = self.output.dim();
        writeln!(out, "{n},{lp},{d}")?;
        for i in 0..n {
            for p in 0..lp {
                let row: Vec<String> = (0..d).map(|k| self.output[[i, p, k]].to_string()).collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

/// Forward pass with fixed weights.
#[derive(Debug, Clone)]
pub struct Reprogrammer {
    pub cfg: PatchConfig,
    pub weights: ReprogramWeights,
}

impl Reprogrammer {
    pub fn new(cfg: PatchConfig, embed_dim: usize, seed: u64) -> Result<Self, ReprogramError> {
        Ok(Self { weights: ReprogramWeights::seeded(&cfg, embed_dim, seed)?, cfg })
    }

    /// Normalises each variable over the window, slices patches and embeds
    /// them. `window` is `n_vars x window`.
    pub fn patchify(&self, window: ArrayView2<f64>) -> Result<Array3<f64>, ReprogramError> {
        let cfg = &self.cfg;
        if window.dim() != (cfg.n_vars, cfg.window) {
            return Err(ReprogramError::DimensionMismatch(format!(
                "window is {:?}, expected ({}, {})",
                window.dim(),
                cfg.n_vars,
                cfg.window
            )));
        }
        if window.iter().any(|x| !x.is_finite()) {
            return Err(ReprogramError::NonFinite);
        }
        let norm = instance_normalize(window);
        let lp = cfg.num_patches();
        let mut out = Array3::zeros((cfg.n_vars, lp, cfg.d_model));
        for p in 0..lp {
            let start = p * cfg.stride;
            let patch = norm.slice(s![.., start..start + cfg.patch_len]);
            out.slice_mut(s![.., p, ..]).assign(&patch.dot(&self.weights.patch_proj));
        }
        Ok(out)
    }

    /// Multi-head cross-attention of patches (queries) over prototypes (keys
    /// and values), heads concatenated and projected to `d_llm`.
    pub fn reprogram(&self, patches: &Array3<f64>, bank: &PrototypeBank) -> Result<ReprogrammedEmbedding, ReprogramError> {
        let cfg = &self.cfg;
        let (n, lp, dm) = patches.dim();
        if dm != cfg.d_model {
            return Err(ReprogramError::DimensionMismatch(format!("patch dim {dm}, expected {}", cfg.d_model)));
        }
        if bank.embed_dim() != self.weights.w_k.nrows() {
            return Err(ReprogramError::DimensionMismatch(format!(
                "prototype dim {}, weights expect {}",
                bank.embed_dim(),
                self.weights.w_k.nrows()
            )));
        }
        let vp = bank.v_prime();
        let xp = patches.view().into_shape_with_order((n * lp, dm)).expect("contiguous patches");
        let q = xp.dot(&self.weights.w_q);
        let k = bank.e_prime.dot(&self.weights.w_k);
        let v = bank.e_prime.dot(&self.weights.w_v);
        let scale = (cfg.d_k as f64).sqrt();

        let mut attention = Array4::zeros((cfg.heads, n, lp, vp));
        let mut z = Array2::zeros((n * lp, dm));
        for h in 0..cfg.heads {
            let cols = s![.., h * cfg.d_k..(h + 1) * cfg.d_k];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) / scale;
            for mut row in scores.axis_iter_mut(Axis(0)) {
                softmax_in_place(row.as_slice_mut().expect("row-major scores"));
            }
            z.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            let a = scores.into_shape_with_order((n, lp, vp)).expect("attention reshape");
            attention.slice_mut(s![h, .., .., ..]).assign(&a);
        }
        let output = z.dot(&self.weights.w_out).into_shape_with_order((n, lp, cfg.d_llm)).expect("output reshape");
        if output.iter().any(|x| !x.is_finite()) {
            return Err(ReprogramError::NonFinite);
        }
        Ok(ReprogrammedEmbedding { output, attention })
    }

    pub fn forward(&self, window: ArrayView2<f64>, bank: &PrototypeBank) -> Result<ReprogrammedEmbedding, ReprogramError> {
        self.reprogram(&self.patchify(window)?, bank)
    }
}

/// Zero mean, unit (population) variance per row; constant rows become zeros.
pub fn instance_normalize(window: ArrayView2<f64>) -> Array2<f64> {
    let mut out = window.to_owned();
    let t = window.ncols() as f64;
    for mut row in out.rows_mut() {
        let mean = row.sum() / t;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
        let sd = var.sqrt();
        if sd > 0.0 && sd > 1e-12 * mean.abs() {
            row.mapv_inplace(|x| (x - mean) / sd);
        } else {
            row.fill(0.0);
        }
    }
    out
}

/// Numerically stable softmax.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(cfg: PatchConfig, v_prime: usize) -> (Reprogrammer, PrototypeBank) {
        let vocab = synthetic_vocab(50, 12, 7);
        (Reprogrammer::new(cfg, 12, 7).unwrap(), build_prototype_bank(vocab.view(), v_prime, 7).unwrap())
    }

    fn window(cfg: &PatchConfig, seed: u64) -> Array2<f64> {
        let mut rng = substream(seed, "test/window");
        Array2::from_shape_fn((cfg.n_vars, cfg.window), |_| 100.0 + rng.random::<f64>() * 10.0)
    }

    #[test]
    fn patch_count_arithmetic() {
        let cfg = PatchConfig { patch_len: 10, stride: 10, ..Default::default() };
        assert_eq!(cfg.num_patches(), 2);
        assert_eq!(PatchConfig::default().num_patches(), 4);
        let bad = PatchConfig { patch_len: 21, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ReprogramError::DegenerateConfig(_))));
        let bad = PatchConfig { d_model: 60, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_series_normalises_to_zero() {
        let cfg = PatchConfig { d_model: 8, heads: 2, d_k: 4, d_llm: 6, ..Default::default() };
        let (r, _) = setup(cfg, 4);
        let mut w = window(&cfg, 1);
        w.row_mut(3).fill(42.5);
        let p = r.patchify(w.view()).unwrap();
        assert!(p.slice(s![3, .., ..]).iter().all(|x| *x == 0.0));
        assert!(p.slice(s![0, .., ..]).iter().any(|x| *x != 0.0));
    }

    #[test]
    fn single_prototype_gets_all_attention() {
        let cfg = PatchConfig { d_model: 8, heads: 2, d_k: 4, d_llm: 6, ..Default::default() };
        let (r, bank) = setup(cfg, 1);
        let out = r.forward(window(&cfg, 2).view(), &bank).unwrap();
        assert!(out.attention.iter().all(|a| *a == 1.0));
        let expected = bank.e_prime.dot(&r.weights.w_v).dot(&r.weights.w_out);
        for i in 0..cfg.n_vars {
            for p in 0..cfg.num_patches() {
                for k in 0..cfg.d_llm {
                    assert!((out.output[[i, p, k]] - expected[[0, k]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bank_size_must_be_strictly_smaller() {
        let vocab = synthetic_vocab(10, 4, 1);
        assert_eq!(
            build_prototype_bank(vocab.view(), 10, 1).unwrap_err(),
            ReprogramError::InvalidSize { v_prime: 10, vocab: 10 }
        );
        let bank = build_prototype_bank(vocab.view(), 3, 1).unwrap();
        for row in bank.probe.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_probe_copies_rows() {
        let vocab = synthetic_vocab(6, 3, 4);
        let mut probe = Array2::zeros((2, 6));
        probe[[0, 4]] = 1.0;
        probe[[1, 1]] = 1.0;
        let bank = PrototypeBank::from_probe(probe, vocab.view()).unwrap();
        assert_eq!(bank.e_prime.row(0), vocab.row(4));
        assert_eq!(bank.e_prime.row(1), vocab.row(1));
    }

    #[test]
    fn embedding_csv_has_shape_header() {
        let cfg = PatchConfig { d_model: 8, heads: 2, d_k: 4, d_llm: 6, ..Default::default() };
        let (r, bank) = setup(cfg, 4);
        let out = r.forward(window(&cfg, 3).view(), &bank).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "5,4,6");
        assert_eq!(lines.len(), 1 + 5 * 4);
        assert_eq!(lines[1].split(',').count(), 6);
    }
}
