use maskcfg::analysis::tv;
use maskcfg::corpus::{random_distribution, random_mixture};
use maskcfg::*;
use proptest::prelude::*;

fn space_strategy() -> impl Strategy<Value = StateSpace> {
    (1usize..=3, 3usize..=5).prop_map(|(d, n)| StateSpace::new(d, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_conserves_mass(space in space_strategy(), seed in 0u64..10_000, t in 0.0f64..5.0) {
        let mu = random_distribution(seed, space, 0.7).unwrap();
        let q = forward_density(&mu, t).unwrap();
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.probs().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn forward_semigroup(space in space_strategy(), seed in 0u64..10_000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let mu = random_distribution(seed, space, 0.7).unwrap();
        let two = forward_density(&forward_density(&mu, s).unwrap(), t).unwrap();
        let one = forward_density(&mu, s + t).unwrap();
        prop_assert!(two.max_abs_diff(&one).unwrap() < 1e-12);
    }

    #[test]
    fn forward_coordinates_commute(seed in 0u64..10_000, t in 0.0f64..3.0) {
        let space = StateSpace::new(2, 4).unwrap();
        let mu = random_distribution(seed, space, 0.8).unwrap();
        let k = ForwardKernel::new(space, t).unwrap();
        let mut a = mu.probs().to_vec();
        k.apply_along(&mut a, 0);
        k.apply_along(&mut a, 1);
        let mut b = mu.probs().to_vec();
        k.apply_along(&mut b, 1);
        k.apply_along(&mut b, 0);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn generator_columns_sum_to_zero(seed in 0u64..10_000, w in -1.0f64..6.0) {
        let m = random_mixture(seed, 2, 4, 2, 0.7).unwrap();
        let gen = guided_reverse(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        let dense = gen.to_dense();
        let n = gen.space().total_states();
        for x in 0..n {
            let col: f64 = (0..n).map(|y| dense[y * n + x]).sum();
            prop_assert!(col.abs() <= 1e-12 * (1.0 + gen.exit_rate(x)));
            prop_assert!((0..n).all(|y| y == x || dense[y * n + x] >= 0.0));
        }
    }

    #[test]
    fn normalizer_at_least_one_and_monotone(seed in 0u64..10_000, dims in 1usize..=2, w in 0.0f64..10.0, dw in 0.0f64..5.0) {
        let m = random_mixture(seed, dims, 4, 3, 0.7).unwrap();
        let a = log_normalizer_z(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        let b = log_normalizer_z(&m, &GuidanceConfig::new(0, w + dw).unwrap()).unwrap();
        prop_assert!(a >= -1e-12);
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn tv_is_a_metric(space in space_strategy(), s1 in 0u64..10_000, s2 in 0u64..10_000, s3 in 0u64..10_000) {
        let a = random_distribution(s1, space, 0.6).unwrap();
        let b = random_distribution(s2, space, 0.6).unwrap();
        let c = random_distribution(s3, space, 0.6).unwrap();
        let ab = tv(&a, &b).unwrap();
        prop_assert_eq!(tv(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - tv(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&ab));
        prop_assert!(ab <= tv(&a, &c).unwrap() + tv(&c, &b).unwrap() + 1e-15);
    }

    #[test]
    fn region_weights_are_ordered(seed in 0u64..10_000, n in 3usize..=6, classes in 2usize..=4, w in 0.0f64..20.0) {
        let m = random_mixture(seed, 2, n, classes, 0.6).unwrap();
        let rd = region_decomposition_2d(&m, "z1").unwrap();
        prop_assert!(rd.ordering_holds(w));
    }

    #[test]
    fn tilt_support_within_conditional(seed in 0u64..10_000, dims in 1usize..=2, w in -0.99f64..8.0) {
        let m = random_mixture(seed, dims, 4, 3, 0.6).unwrap();
        let g = GuidanceConfig::new(1, w).unwrap();
        let tilt = tilted_distribution(&m, &g).unwrap();
        for (x, &v) in tilt.probs().iter().enumerate() {
            if v > 0.0 {
                prop_assert!(m.conditional(1).prob(x) > 0.0);
            }
        }
    }

    #[test]
    fn sampled_2d_is_normalized(seed in 0u64..10_000, n in 3usize..=5, w in 0.0f64..6.0) {
        let m = random_mixture(seed, 2, n, 2, 0.7).unwrap();
        let q = sampled_distribution_2d(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert_eq!(q.masked_mass(), 0.0);
    }
}
