use mixtrade_core::oracle::{close_enough, naive_attention};
use mixtrade_core::reprogram::{
    build_prototype_bank, instance_normalize, synthetic_vocab, PatchConfig, ReprogramError, Reprogrammer,
};
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn setup(n_vars: usize, window: usize, patch_len: usize, stride: usize, heads: usize, d_k: usize, seed: u64) -> Option<(Reprogrammer, mixtrade_core::reprogram::PrototypeBank)> {
    let cfg = PatchConfig { n_vars, window, patch_len, stride, d_model: heads * d_k, heads, d_k, d_llm: 12 };
    cfg.validate().ok()?;
    let rp = Reprogrammer::new(cfg, 10, seed).unwrap();
    let vocab = synthetic_vocab(40, 10, seed ^ 7);
    let bank = build_prototype_bank(vocab.view(), 8, seed ^ 9).unwrap();
    Some((rp, bank))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_is_a_distribution_and_matches_oracle(
        n_vars in 1usize..5, window in 4usize..24, patch_len in 1usize..6, stride in 1usize..6,
        heads in 1usize..4, d_k in 1usize..6, seed in any::<u64>(),
        values in prop::collection::vec(1.0f64..500.0, 120),
    ) {
        let Some((rp, bank)) = setup(n_vars, window, patch_len.min(window), stride, heads, d_k, seed) else {
            return Ok(());
        };
        let w = Array2::from_shape_fn((n_vars, window), |(i, j)| values[(i * window + j) % values.len()]);
        let out = rp.forward(w.view(), &bank).unwrap();
        let lp = rp.cfg.num_patches();
        prop_assert_eq!(out.output.dim(), (n_vars, lp, 12));
        prop_assert_eq!(out.attention.dim(), (heads, n_vars, lp, 8));
        for row in out.attention.lanes(Axis(3)) {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-6);
            prop_assert!(row.iter().all(|a| *a >= 0.0));
        }
        let (o, a) = naive_attention(&rp, &rp.patchify(w.view()).unwrap(), &bank);
        prop_assert!(o.iter().zip(out.output.iter()).all(|(x, y)| close_enough(*x, *y, 1e-9)));
        prop_assert!(a.iter().zip(out.attention.iter()).all(|(x, y)| close_enough(*x, *y, 1e-9)));
    }

    #[test]
    fn positive_affine_rescaling_changes_nothing(
        scale in 0.001f64..1000.0, shift in -500.0f64..500.0, seed in any::<u64>(),
        values in prop::collection::vec(1.0f64..500.0, 100),
    ) {
        let (rp, bank) = setup(5, 20, 5, 5, 4, 4, seed).unwrap();
        let w = Array2::from_shape_vec((5, 20), values).unwrap();
        let a = rp.forward(w.view(), &bank).unwrap();
        let b = rp.forward(w.mapv(|x| scale * x + shift).view(), &bank).unwrap();
        prop_assert!(a.output.iter().zip(b.output.iter()).all(|(x, y)| close_enough(*x, *y, 1e-9)));
    }
}

#[test]
fn default_shapes_and_digest() {
    let cfg = PatchConfig::default();
    assert_eq!(cfg.num_patches(), 4);
    let rp = Reprogrammer::new(cfg, 64, 1).unwrap();
    let bank = build_prototype_bank(synthetic_vocab(1000, 64, 2).view(), 32, 3).unwrap();
    let w = Array2::from_shape_fn((5, 20), |(i, j)| 100.0 + (i * 20 + j) as f64);
    let a = rp.forward(w.view(), &bank).unwrap();
    assert_eq!(a.output.dim(), (5, 4, 128));
    assert_eq!(a.attention.dim(), (4, 5, 4, 32));
    let again = Reprogrammer::new(cfg, 64, 1).unwrap().forward(w.view(), &bank).unwrap();
    assert_eq!(a.digest(), again.digest());
    let other = Reprogrammer::new(cfg, 64, 2).unwrap().forward(w.view(), &bank).unwrap();
    assert_ne!(a.digest(), other.digest());
}

#[test]
fn bad_inputs_are_rejected() {
    let bad = PatchConfig { patch_len: 30, ..PatchConfig::default() };
    assert!(matches!(bad.validate(), Err(ReprogramError::DegenerateConfig(_))));
    let heads = PatchConfig { d_model: 63, ..PatchConfig::default() };
    assert!(heads.validate().is_err());
    let rp = Reprogrammer::new(PatchConfig::default(), 64, 1).unwrap();
    assert!(matches!(rp.patchify(Array2::zeros((5, 19)).view()), Err(ReprogramError::DimensionMismatch(_))));
    let mut w = Array2::from_elem((5, 20), 1.0);
    w[[2, 3]] = f64::NAN;
    assert!(matches!(rp.patchify(w.view()), Err(ReprogramError::NonFinite)));
}

#[test]
fn constant_rows_normalise_to_zero() {
    let w = Array2::from_shape_fn((2, 4), |(i, j)| if i == 0 { 7.0 } else { j as f64 });
    let n = instance_normalize(w.view());
    assert!(n.row(0).iter().all(|x| *x == 0.0));
    assert!(n.row(1).sum().abs() < 1e-12);
    assert!((n.row(1).mapv(|x| x * x).sum() / 4.0 - 1.0).abs() < 1e-12);
}
