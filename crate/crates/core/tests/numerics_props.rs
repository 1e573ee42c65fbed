use npforest_core::marginals::{default_delta, empirical_cdf, winsorized_cdf, MarginalTransform};
use npforest_core::numerics::{std_normal_cdf, std_normal_quantile, Cholesky};
use npforest_core::{Dataset, IdentificationMode, SymMatrix};
use proptest::prelude::*;

fn spd(d: usize, entries: &[f64], ridge: f64) -> SymMatrix {
    // BᵀB + ridge·I
    let mut m = SymMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..d)
                .map(|k| entries[k * d + i] * entries[k * d + j])
                .sum();
            m.set(i, j, s + if i == j { ridge } else { 0.0 });
        }
    }
    m
}

#[test]
fn quantile_roundtrip_dense_grid() {
    let mut worst: f64 = 0.0;
    for k in 0..=20_000 {
        // Log-spaced toward both tails plus a uniform sweep.
        let t = k as f64 / 20_000.0;
        for p in [1e-8 + t * (1.0 - 2e-8), 10f64.powf(-8.0 + 7.7 * t)] {
            for q in [p, 1.0 - p] {
                let x = std_normal_quantile(q).unwrap();
                worst = worst.max((std_normal_cdf(x) - q).abs());
            }
        }
    }
    assert!(worst <= 1e-10, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_inverse(d in 1usize..=20, seed in proptest::collection::vec(-1.0f64..1.0, 400)) {
        let m = spd(d, &seed, 0.5);
        let inv = Cholesky::new(&m).unwrap().inverse();
        let prod = m.matmul(&inv);
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[i * d + j] - target).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn factorization_is_bit_deterministic(d in 1usize..=8, seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let m = spd(d, &seed, 0.3);
        let a = Cholesky::new(&m).unwrap();
        let b = Cholesky::new(&m.clone()).unwrap();
        prop_assert_eq!(a.log_det().to_bits(), b.log_det().to_bits());
        prop_assert_eq!(a.inverse(), b.inverse());
    }

    #[test]
    fn rank_invariance(xs in proptest::collection::btree_set(-1000i32..1000, 5..60), ys in proptest::collection::vec(-50.0f64..50.0, 60)) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64 / 7.0).collect();
        let n = x.len();
        let y: Vec<f64> = ys[..n].to_vec();
        let base = Dataset::from_columns(&[x.clone(), y.clone()]).unwrap();
        let cube = Dataset::from_columns(&[x.iter().map(|v| v * v * v).collect(), y.clone()]).unwrap();
        let expo = Dataset::from_columns(&[x.iter().map(|v| (v / 50.0).exp()).collect(), y]).unwrap();
        let cov = |d: &Dataset| {
            MarginalTransform::fit(d, None, IdentificationMode::NormalScores)
                .and_then(|t| t.transformed_covariance(d))
        };
        match cov(&base) {
            Ok(c) => {
                prop_assert_eq!(&c, &cov(&cube).unwrap());
                prop_assert_eq!(&c, &cov(&expo).unwrap());
            }
            Err(_) => prop_assert!(cov(&cube).is_err()),
        }
    }

    #[test]
    fn scores_bounded_monotone_and_clamp_consistent(mut xs in proptest::collection::vec(-100.0f64..100.0, 3..200)) {
        let n = xs.len();
        let data = Dataset::from_columns(&[xs.clone()]).unwrap();
        prop_assume!(data.find_constant_column().is_none());
        let t = MarginalTransform::fit(&data, None, IdentificationMode::NormalScores).unwrap();
        let delta = default_delta(n).unwrap();
        let lo = std_normal_quantile(delta).unwrap();
        let hi = std_normal_quantile(1.0 - delta).unwrap();
        xs.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &x in &xs {
            let s = t.transform_value(0, x);
            prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
            prop_assert!(s >= prev);
            prev = s;
            let f = empirical_cdf(&xs, x);
            if f >= delta && f <= 1.0 - delta {
                prop_assert_eq!(winsorized_cdf(&xs, x, delta), f);
            }
        }
    }
}
