//! Worked cases checked against closed forms, brute force or the oracle.

mod common;

use std::collections::BTreeSet;

use common::*;
use maskcfg::analysis::{Region, RegionDecomposition};
use maskcfg::corpus::{mixture_from_vectors, random_distribution, random_mixture};
use maskcfg::samplers::chi_square_test;
use maskcfg::*;

#[test]
fn one_mask_forward_density() {
    let s = StateSpace::new(2, 5).unwrap();
    let mu = random_distribution(3, s, 0.8).unwrap();
    let t: f64 = 1.0;
    for i in 1..=4 {
        let x = s.index_of(&[i, 5]).unwrap();
        let marginal = brute_marginal(s, mu.probs(), x);
        let expected = (-t).exp() * (1.0 - (-t).exp()) * marginal;
        let direct = forward_density_at(&mu, &[i, 5], t).unwrap();
        assert!((direct - expected).abs() < 1e-15);
        assert!((forward_density(&mu, t).unwrap().prob(x) - expected).abs() < 1e-15);
    }
}

#[test]
fn euler_steps_of_reverse_rates_track_forward_marginals() {
    let s = StateSpace::new(2, 4).unwrap();
    let mu = random_distribution(4, s, 1.0).unwrap();
    let gen = unguided_reverse(&mu).unwrap();
    let (horizon, t) = (2.0, 0.5);
    let start = forward_density(&mu, horizon - t).unwrap();
    let err = |h: f64| {
        let mut q = start.probs().to_vec();
        let n = q.len();
        let mut out = vec![0.0; n];
        gen.apply(&q, &mut out);
        let f = maskcfg::rates::time_factor(horizon - t);
        for i in 0..n {
            q[i] += h * f * out[i];
        }
        max_abs(&q, forward_density(&mu, horizon - t - h).unwrap().probs())
    };
    let (e1, e2) = (err(1e-2), err(5e-3));
    let ratio = e1 / e2;
    assert!((3.0..=5.0).contains(&ratio), "{e1:e} {e2:e}");
}

#[test]
fn one_dimensional_unguided_against_oracle() {
    let s = StateSpace::new(1, 4).unwrap();
    let p = DenseDistribution::from_unmasked(s, &[0.2, 0.3, 0.5]).unwrap();
    let gen = unguided_reverse(&p).unwrap();
    let sol = evolve_exact(&gen, 2.0, &[1.0], &all_mask(s)).unwrap();
    let q = solve_1d_unguided(&p, 2.0, 1.0).unwrap();
    assert!(q.max_abs_diff(&sol.densities[0]).unwrap() < 1e-10);
}

fn overlap_pair() -> MixtureModel {
    let s = StateSpace::new(1, 4).unwrap();
    mixture_from_vectors(s, &[0.5, 0.5], &[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap()
}

#[test]
fn overlap_pair_against_oracle_and_cases() {
    let m = overlap_pair();
    let g = GuidanceConfig::new(0, 1.0).unwrap();
    let gen = guided_reverse(&m, &g).unwrap();
    let sol = evolve_exact(&gen, 2.0, &[1.0, 2.0], &all_mask(m.space())).unwrap();
    let half = solve_1d_guided(&m, &g, 2.0, 1.0).unwrap();
    assert!(half.max_abs_diff(&sol.densities[0]).unwrap() < 1e-10);
    let cases = sampled_distribution_1d_cases(&m, &g).unwrap();
    assert!(cases.max_abs_diff(&sol.densities[1]).unwrap() < 1e-10);
    assert!((cases.prob(0) - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn self_guidance_follows_unguided_trajectory() {
    let s = StateSpace::new(2, 4).unwrap();
    let p = random_distribution(12, s, 0.8).unwrap();
    let m = MixtureModel::new(s, vec!["z1".into()], vec![1.0], vec![p.clone()]).unwrap();
    let times = [0.4, 0.75, 1.3];
    let sol = evolve_exact(&unguided_reverse(&p).unwrap(), 1.5, &times, &all_mask(s)).unwrap();
    for w in [0.5, 3.0] {
        let g = GuidanceConfig::new(0, w).unwrap();
        for (t, d) in times.iter().zip(&sol.densities) {
            assert!(solve_2d_guided(&m, &g, 1.5, *t).unwrap().max_abs_diff(d).unwrap() < 1e-10);
        }
        let flat = tv_curve_2d(&m, &g, 1.5, &times).unwrap();
        for (v, d) in flat.values.iter().zip(&sol.densities) {
            assert!((v - d.masked_mass()).abs() < 1e-10);
        }
    }
}

#[test]
fn mixed_state_cases_against_oracle() {
    let m = random_mixture(77, 2, 5, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 1.0).unwrap();
    let sol = evolve_exact(&guided_reverse(&m, &g).unwrap(), 2.0, &[1.0], &all_mask(m.space())).unwrap();
    let q = solve_2d_guided(&m, &g, 2.0, 1.0).unwrap();
    let s = m.space();
    let mask = s.alphabet();
    for c in [[1, 2], [3, mask], [mask, 2], [mask, mask]] {
        let x = s.index_of(&c).unwrap();
        assert!((q.prob(x) - sol.densities[0].prob(x)).abs() < 1e-8, "{c:?}");
    }
}

#[test]
fn two_dimensional_tv_matches_oracle() {
    let m = random_mixture(78, 2, 4, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 1.0).unwrap();
    let times = [0.3, 0.9, 1.4];
    let curve = tv_curve_2d(&m, &g, 1.5, &times).unwrap();
    let gen = guided_reverse(&m, &g).unwrap();
    let sol = evolve_exact(&gen, 1.5, &[0.3, 0.9, 1.4, 1.5], &all_mask(m.space())).unwrap();
    for (k, v) in curve.values.iter().enumerate() {
        let direct = tv(&sol.densities[k], &sol.densities[3]).unwrap();
        assert!((v - direct).abs() < 1e-8);
    }
}

#[test]
fn tv_curve_known_ratio() {
    let m = random_mixture(5, 1, 5, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 0.0).unwrap();
    let curve = tv_curve_1d_closed(&m, &g, 1.0, &[0.5]).unwrap();
    assert!((curve.values[0] - 0.622459).abs() < 1e-6);
    let tilt = tilted_distribution(&m, &g).unwrap();
    let direct = tv(&solve_1d_guided(&m, &g, 1.0, 0.5).unwrap(), &tilt).unwrap();
    assert!((curve.values[0] - direct).abs() < 1e-12);
}

#[test]
fn one_dimensional_decay_slope_tracks_sup_ratio() {
    let m = maskcfg::corpus::unique_maximizer_mixture(5, 1, 6).unwrap();
    let t0 = 1.2;
    let ws = [40.0, 45.0, 50.0, 55.0, 60.0];
    let curves: Vec<TVCurve> = ws
        .iter()
        .map(|&w| tv_curve_1d_closed(&m, &GuidanceConfig::new(0, w).unwrap(), 1.5, &[t0]).unwrap())
        .collect();
    let fit = decay_exponent_fit(&curves, t0).unwrap();
    let target = maskcfg::analysis::log_sup_ratio(&m, 0);
    assert!(((fit.slope - target) / target).abs() < 0.1);
}

#[test]
fn self_guided_decay_is_flat() {
    let s = StateSpace::new(2, 4).unwrap();
    let p = random_distribution(13, s, 0.8).unwrap();
    let m = MixtureModel::new(s, vec!["z1".into()], vec![1.0], vec![p]).unwrap();
    let curves: Vec<TVCurve> = (2..=8)
        .map(|w| tv_curve_2d(&m, &GuidanceConfig::new(0, w as f64).unwrap(), 1.5, &[1.0]).unwrap())
        .collect();
    assert!(decay_exponent_fit(&curves, 1.0).unwrap().slope.abs() < 1e-10);
}

/// Regions recomputed from supports by plain set arithmetic.
fn brute_regions(m: &MixtureModel) -> Vec<BTreeSet<Vec<usize>>> {
    let s = m.space();
    let k = s.alphabet() - 1;
    let cells = |c: &DenseDistribution| -> BTreeSet<(usize, usize)> {
        (1..=k)
            .flat_map(|i| (1..=k).map(move |j| (i, j)))
            .filter(|&(i, j)| c.at(&[i, j]).unwrap() > 0.0)
            .collect()
    };
    let supports: Vec<_> = m.conditionals().iter().map(cells).collect();
    let others: BTreeSet<(usize, usize)> = supports[1..].iter().flatten().copied().collect();
    let rows: BTreeSet<usize> = others.iter().map(|c| c.0).collect();
    let cols: BTreeSet<usize> = others.iter().map(|c| c.1).collect();
    let mut out = vec![BTreeSet::new(); 5];
    for &(i, j) in &supports[0] {
        let slot = if others.contains(&(i, j)) {
            4
        } else {
            match (rows.contains(&i), cols.contains(&j)) {
                (false, false) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (true, true) => 3,
            }
        };
        out[slot].insert(vec![i, j]);
    }
    out
}

fn library_regions(rd: &RegionDecomposition) -> Vec<BTreeSet<Vec<usize>>> {
    Region::ALL
        .iter()
        .map(|&r| rd.member_coords(r).into_iter().collect())
        .collect()
}

#[test]
fn regions_match_set_arithmetic() {
    for seed in 0..30 {
        let m = random_mixture(seed, 2, 5, 2 + (seed % 2) as usize, 0.4).unwrap();
        let rd = region_decomposition_2d(&m, "z1").unwrap();
        assert_eq!(library_regions(&rd), brute_regions(&m), "seed {seed}");
    }
}

#[test]
fn disjoint_marginals_leave_the_conditional() {
    let s = StateSpace::new(2, 5).unwrap();
    let mut a = vec![0.0; 16];
    let mut b = vec![0.0; 16];
    a[0] = 0.3;
    a[1] = 0.7;
    b[10] = 0.5;
    b[15] = 0.5;
    let m = mixture_from_vectors(s, &[0.4, 0.6], &[a, b]).unwrap();
    let rd = region_decomposition_2d(&m, "z1").unwrap();
    assert_eq!(rd.members(Region::R1).len(), 2);
    for w in [0.0, 1.0, 10.0] {
        let q = sampled_distribution_2d(&m, &GuidanceConfig::new(0, w).unwrap()).unwrap();
        assert!(q.max_abs_diff(m.conditional(0)).unwrap() < 1e-12);
    }
    let limit = limit_distribution_2d(&rd, &m).unwrap();
    assert!(limit.max_abs_diff(m.conditional(0)).unwrap() < 1e-15);
}

#[test]
fn ode_order_in_one_dimension() {
    let m = random_mixture(14, 1, 5, 2, 1.0).unwrap();
    let gen = guided_reverse(&m, &GuidanceConfig::new(0, 1.0).unwrap()).unwrap();
    let q0 = all_mask(m.space());
    let exact = evolve_exact(&gen, 1.5, &[1.0], &q0).unwrap().densities[0].clone();
    let err = |h: f64| {
        evolve_ode(&gen, 1.5, &[1.0], &q0, h).unwrap().densities[0]
            .max_abs_diff(&exact)
            .unwrap()
    };
    let ratio = err(0.05) / err(0.025);
    assert!((8.0..=32.0).contains(&ratio), "{ratio}");
}

#[test]
fn tau_leaping_unguided_one_dimension() {
    let s = StateSpace::new(1, 4).unwrap();
    let p = DenseDistribution::from_unmasked(s, &[0.2, 0.3, 0.5]).unwrap();
    let gen = unguided_reverse(&p).unwrap();
    let b = sample_tau_leaping(&gen, 1.5, 200, 100_000, 1).unwrap();
    assert!(tv(&empirical_distribution(&b).unwrap(), &p).unwrap() <= 0.02);
}

#[test]
fn coarse_tau_leaping_is_worse_at_strong_guidance() {
    let m = random_mixture(301, 2, 4, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 5.0).unwrap();
    let gen = guided_reverse(&m, &g).unwrap();
    let exact = sampled_distribution_2d(&m, &g).unwrap();
    let run = |steps| {
        let b = sample_tau_leaping(&gen, 1.5, steps, 100_000, 9).unwrap();
        tv(&empirical_distribution(&b).unwrap(), &exact).unwrap()
    };
    assert!(run(50) > run(500));
}

#[test]
fn exact_sampler_within_binomial_bands() {
    let m = random_mixture(15, 1, 6, 2, 1.0).unwrap();
    let g = GuidanceConfig::new(0, 2.0).unwrap();
    let n = 200_000;
    let b = sample_exact_event(&guided_reverse(&m, &g).unwrap(), 1.5, n, 4).unwrap();
    let q = solve_1d_guided(&m, &g, 1.5, 1.5).unwrap();
    for (c, p) in b.counts().iter().zip(q.probs()) {
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - n as f64 * p).abs() <= 3.0 * sigma + 1e-9);
    }
}

#[test]
fn exact_sampler_two_dimensions() {
    let m = random_mixture(16, 2, 4, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 1.0).unwrap();
    let b = sample_exact_event(&guided_reverse(&m, &g).unwrap(), 1.5, 200_000, 5).unwrap();
    let exact = sampled_distribution_2d(&m, &g).unwrap();
    assert!(tv(&empirical_distribution(&b).unwrap(), &exact).unwrap() <= 0.01);
    assert!(chi_square_test(&b.counts(), &exact, 1e-3).unwrap().passes());
}

#[test]
fn uniformization_sampler_matches_terminal_law() {
    let m = random_mixture(17, 2, 4, 2, 0.8).unwrap();
    let g = GuidanceConfig::new(0, 1.0).unwrap();
    let b = sample_uniformization(&guided_reverse(&m, &g).unwrap(), 1.5, 100_000, 6).unwrap();
    let exact = sampled_distribution_2d(&m, &g).unwrap();
    assert!(chi_square_test(&b.counts(), &exact, 1e-3).unwrap().passes());
    assert!(b.diagnostics.virtual_events > 0);
}
