use gce_core::estimator::{ksg_cmi, local_permutation_test, SampleBlock};
use gce_core::{conditional_gce, gce, EstimatorConfig, TimeSeriesDataset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (a, rho * a + (1.0 - rho * rho).sqrt() * b)
        })
        .unzip()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    for (r, i) in idx.into_iter().enumerate() {
        out[i] = r as f64;
    }
    out
}

fn block(v: Vec<f64>) -> SampleBlock {
    SampleBlock::new(vec![v]).unwrap()
}

#[test]
fn monotone_transforms_barely_move_the_estimate() {
    for (seed, rho) in [(0u64, 0.0), (1, 0.5), (2, 0.9)] {
        let (x, y) = gaussian_pair(2000, rho, seed);
        let raw = ksg_cmi(&block(x.clone()), &block(y.clone()), &SampleBlock::empty(2000), 10).unwrap();
        let ranked = ksg_cmi(&block(ranks(&x)), &block(ranks(&y)), &SampleBlock::empty(2000), 10).unwrap();
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let warped = ksg_cmi(&block(cubed), &block(y), &SampleBlock::empty(2000), 10).unwrap();
        assert!((raw - ranked).abs() < 0.1, "rho={rho}: {raw} vs {ranked}");
        assert!((raw - warped).abs() < 0.1, "rho={rho}: {raw} vs {warped}");
    }
}

#[test]
fn gce_without_conditioners_is_conditional_gce() {
    let (x, y) = gaussian_pair(300, 0.3, 5);
    let ds = TimeSeriesDataset::from_columns(vec![x, y]).unwrap();
    let cfg = EstimatorConfig::default();
    let a = gce(&ds, 0, 1, &cfg).unwrap();
    let b = conditional_gce(&ds, 0, 1, &[], &cfg).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimate_is_symmetric(seed in any::<u64>(), rho in -0.9f64..0.9) {
        let (x, y) = gaussian_pair(200, rho, seed);
        let z = SampleBlock::empty(200);
        let a = ksg_cmi(&block(x.clone()), &block(y.clone()), &z, 5).unwrap();
        let b = ksg_cmi(&block(y), &block(x), &z, 5).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn p_values_are_floored_and_reproducible(seed in any::<u64>(), rho in -0.9f64..0.9, n_perm in 5usize..40, conditioned in any::<bool>()) {
        let (x, y) = gaussian_pair(150, rho, seed);
        let (z, _) = gaussian_pair(150, 0.0, seed ^ 1);
        let z = if conditioned { block(z) } else { SampleBlock::empty(150) };
        let cfg = EstimatorConfig { n_perm, k: 5, ..EstimatorConfig::default() };
        let first = local_permutation_test(&block(x.clone()), &block(y.clone()), &z, &cfg, seed).unwrap();
        let again = local_permutation_test(&block(x), &block(y), &z, &cfg, seed).unwrap();
        prop_assert!(first.p_value >= 1.0 / (1.0 + n_perm as f64));
        prop_assert!(first.p_value <= 1.0);
        prop_assert_eq!(first, again);
    }
}
