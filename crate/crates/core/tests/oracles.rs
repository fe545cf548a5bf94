//! Library results against independent test-side references.

mod common;

use common::*;
use maskcfg::corpus::{block_overlap_2d, random_distribution, random_mixture};
use maskcfg::numerics::TimeRatio;
use maskcfg::*;

const T: f64 = 1.5;

#[test]
fn full_distribution_is_weighted_sum() {
    for seed in 0..5 {
        let m = random_mixture(seed, 2, 4, 3, 0.6).unwrap();
        assert!(max_abs(full_distribution(&m).probs(), &brute_full(&m)) < 1e-15);
    }
}

#[test]
fn guided_rates_match_marginal_formula() {
    for seed in 0..6 {
        let m = random_mixture(10 + seed, 2, 4, 2, 0.7).unwrap();
        for w in [-1.0, 0.0, 0.5, 2.0] {
            let gen = guided_reverse(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
            let dense = gen.to_dense();
            let brute = brute_guided_base(&m, 0, w);
            let scale = brute.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            assert!(max_abs(&dense, &brute) <= 1e-12 * scale, "seed {seed} w {w}");
        }
    }
}

#[test]
fn unguided_limit_of_guidance() {
    let m = random_mixture(3, 2, 4, 2, 0.8).unwrap();
    let a = guided_reverse(&m, &GuidanceConfig::new(0, -1.0).unwrap()).unwrap();
    let b = unguided_reverse(m.full()).unwrap();
    assert!(max_abs(&a.to_dense(), &b.to_dense()) < 1e-13);
}

#[test]
fn coefficients_match_direct_sums() {
    for seed in 0..5 {
        let m = random_mixture(20 + seed, 2, 5, 2, 0.7).unwrap();
        let w = 1.5;
        let coef = maskcfg::coefficients_2d(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        let s = m.space();
        let k = s.alphabet() - 1;
        let p = brute_full(&m);
        let pz = m.conditional(0).probs();
        let g = |x: usize| if pz[x] > 0.0 { p[x].powf(-w) * pz[x].powf(1.0 + w) } else { 0.0 };
        let z: f64 = (0..s.total_states()).map(g).sum();
        assert!((coef.z() - z).abs() <= 1e-12 * z);
        let m1 = |i: usize| brute_marginal(s, &p, s.with_digit(s.all_mask_index(), 0, i));
        let mz1 = |i: usize| brute_marginal(s, pz, s.with_digit(s.all_mask_index(), 0, i));
        let mut sum_g1 = 0.0;
        for i in 0..k {
            if mz1(i) == 0.0 {
                continue;
            }
            let g1 = m1(i).powf(-w) * mz1(i).powf(1.0 + w);
            sum_g1 += g1;
            let row: f64 = (0..k).map(|j| g(s.index_of(&[i + 1, j + 1]).unwrap())).sum();
            assert!((coef.c(i) - row / g1).abs() <= 1e-12 * coef.c(i));
        }
        assert!((coef.c(k) - z / sum_g1).abs() <= 1e-12 * coef.c(k));
    }
}

#[test]
fn row_coefficient_is_divergence_of_slices() {
    let m = random_mixture(31, 2, 4, 2, 1.0).unwrap();
    let s = m.space();
    let row_space = StateSpace::new(1, 4).unwrap();
    for w in [0.5, 2.0, 4.0] {
        let coef = maskcfg::coefficients_2d(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        for i in 0..3 {
            let slice = |d: &DenseDistribution| {
                let v: Vec<f64> = (0..3).map(|j| d.at(&[i + 1, j + 1]).unwrap()).collect();
                let t: f64 = v.iter().sum();
                DenseDistribution::from_unmasked(row_space, &v.iter().map(|x| x / t).collect::<Vec<_>>()).unwrap()
            };
            let div = alpha_divergence(&slice(m.conditional(0)), &slice(m.full()), 1.0 + w).unwrap();
            assert!((coef.ln_c[i] - w * div).abs() < 1e-12);
        }
    }
    assert_eq!(s.dims(), 2);
}

#[test]
fn closed_form_2d_matches_test_side_rk4() {
    for seed in 0..3 {
        let m = random_mixture(40 + seed, 2, 3 + seed as usize, 2, 0.8).unwrap();
        for w in [0.0, 1.0, 3.0] {
            let g = GuidanceConfig::new(0, w).unwrap();
            let b = brute_guided_base(&m, 0, w);
            for t in [0.3, 0.9, 1.35] {
                let s = -ratio(T, t).ln();
                let q = rk4_linear(&b, all_mask(m.space()).probs(), s, 4000);
                let closed = solve_2d_guided(&m, &g, T, t).unwrap();
                assert!(max_abs(&q, closed.probs()) < 1e-10, "seed {seed} w {w} t {t}");
            }
        }
    }
}

#[test]
fn block_overlap_terminal_law_frozen() {
    // from the test-side RK4 integration to s = 40
    let m = block_overlap_2d().unwrap();
    let q = sampled_distribution_2d(&m, &GuidanceConfig::new(0, 1.0).unwrap()).unwrap();
    let s = m.space();
    let at = |c: [usize; 2]| q.prob(s.index_of(&c).unwrap());
    assert!((at([1, 1]) - 1.0 / 6.0).abs() < 1e-12);
    for c in [[2, 1], [3, 1], [1, 2], [1, 3]] {
        assert!((at(c) - 7.0 / 48.0).abs() < 1e-12);
    }
    for c in [[2, 2], [2, 3], [3, 2], [3, 3]] {
        assert!((at(c) - 1.0 / 16.0).abs() < 1e-12);
    }
}

#[test]
fn forward_density_solves_forward_equation() {
    let s = StateSpace::new(2, 4).unwrap();
    let mu = random_distribution(5, s, 0.8).unwrap();
    let gen = forward_generator(s);
    for t in [0.2, 1.0, 2.5] {
        let q = rk4_linear(&gen, mu.probs(), t, 2000);
        assert!(max_abs(&q, forward_density(&mu, t).unwrap().probs()) < 1e-12);
        for x in 0..s.total_states() {
            let direct = forward_density_at(&mu, &s.state_of(x), t).unwrap();
            assert!((direct - q[x]).abs() < 1e-12);
        }
    }
}

#[test]
fn reverse_rates_are_forward_density_ratios() {
    let s = StateSpace::new(2, 4).unwrap();
    let mu = random_distribution(6, s, 1.0).unwrap();
    let gen = unguided_reverse(&mu).unwrap();
    for tau in [0.1, 0.7, 2.0] {
        let fwd = forward_density(&mu, tau).unwrap();
        for x in 0..s.total_states() {
            for (y, _) in gen.transitions(x) {
                let expected = fwd.prob(y) / fwd.prob(x);
                let got = gen.rate_at(tau, y, x);
                assert!((got - expected).abs() <= 1e-12 * expected);
            }
        }
    }
}

#[test]
fn reverse_of_forward_recovers_forward_marginals() {
    let s = StateSpace::new(2, 4).unwrap();
    let mu = random_distribution(7, s, 0.9).unwrap();
    let gen = unguided_reverse(&mu).unwrap();
    let start = forward_density(&mu, T).unwrap();
    let times = [0.25, 0.75, 1.2, 1.45];
    let sol = evolve_exact(&gen, T, &times, &start).unwrap();
    for (t, q) in times.iter().zip(&sol.densities) {
        let target = forward_density(&mu, T - t).unwrap();
        assert!(q.max_abs_diff(&target).unwrap() < 1e-12);
    }
}

#[test]
fn ode_error_is_fourth_order() {
    let m = random_mixture(8, 2, 4, 2, 0.8).unwrap();
    let gen = guided_reverse(&m, &GuidanceConfig::new(0, 1.0).unwrap()).unwrap();
    let q0 = all_mask(m.space());
    let times = [1.0];
    let exact = evolve_exact(&gen, T, &times, &q0).unwrap().densities[0].clone();
    let err = |h: f64| {
        let d = evolve_ode(&gen, T, &times, &q0, h).unwrap().densities[0].clone();
        d.max_abs_diff(&exact).unwrap()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!((8.0..=32.0).contains(&ratio), "errors {e1:e} {e2:e}");
}

#[test]
fn exact_and_ode_agree_in_three_dimensions() {
    let m = random_mixture(9, 3, 3, 2, 0.8).unwrap();
    let gen = guided_reverse(&m, &GuidanceConfig::new(0, 0.5).unwrap()).unwrap();
    let q0 = all_mask(m.space());
    let times = [0.3, 0.8, 1.2];
    let a = evolve_exact(&gen, T, &times, &q0).unwrap();
    let b = evolve_ode(&gen, T, &times, &q0, 1e-3).unwrap();
    for (x, y) in a.densities.iter().zip(&b.densities) {
        assert!(x.max_abs_diff(y).unwrap() < 1e-8);
    }
}

#[test]
fn rates_factor_through_one_time_function() {
    let m = random_mixture(11, 2, 4, 2, 0.8).unwrap();
    let gen = guided_reverse(&m, &GuidanceConfig::new(0, 2.0).unwrap()).unwrap();
    let (t1, t2) = (0.3, 1.1);
    let expected = (t2 as f64).exp_m1() / (t1 as f64).exp_m1();
    for x in 0..gen.space().total_states() {
        for (y, _) in gen.transitions(x) {
            let ratio = gen.rate_at(t1, y, x) / gen.rate_at(t2, y, x);
            assert!((ratio - expected).abs() < 1e-12 * expected);
        }
    }
}

#[test]
fn one_dimensional_terminal_law_is_the_tilt() {
    for seed in 0..5 {
        let m = random_mixture(50 + seed, 1, 7, 3, 0.7).unwrap();
        for w in [-1.0, 0.0, 0.5, 3.0] {
            let q = solve_1d_guided(&m, &GuidanceConfig::new(1, w).unwrap(), T, T).unwrap();
            assert!(max_abs(q.probs(), &brute_tilt(&m, 1, w)) < 1e-13);
        }
    }
}

#[test]
fn two_dimensional_terminal_law_is_not_a_tilt_multiple() {
    let m = block_overlap_2d().unwrap();
    for w in [0.5, 1.0, 4.0] {
        let q = sampled_distribution_2d(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        let tilt = brute_tilt(&m, 0, w);
        let ratios: Vec<f64> = (0..tilt.len()).filter(|&x| tilt[x] > 0.0).map(|x| q.prob(x) / tilt[x]).collect();
        let spread = ratios.iter().fold(0.0f64, |a, &b| a.max(b)) - ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread > 1e-3, "w {w}");
    }
}

#[test]
fn time_ratio_matches_definition() {
    for t in [0.0, 0.4, 1.0, 1.49] {
        let tr = TimeRatio::new(T, t).unwrap();
        assert!((tr.r - ratio(T, t)).abs() < 1e-15);
    }
}
