//! Numbered acceptance checks over seeded corpora.
//!
//! Each check returns a [`CriterionReport`]; [`run_all`] runs all eleven.
//! Quick mode shrinks corpora and sample sizes for smoke runs, and fault
//! injection perturbs the 2D coefficients so that check 5 must fail.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    decay_exponent_fit, limit_distribution_2d, local_moments, private_states, region_decomposition_2d, restrict,
    shared_states, tv, tv_curve_1d_closed, tv_curve_2d, Region,
};
use crate::closed_form::{
    coefficients_2d, sampled_distribution_2d, sampled_from_coefficients, solve_1d_guided, solve_1d_unguided,
    solve_2d_guided,
};
use crate::corpus::{
    block_overlap_2d, disjoint_1d, disjoint_2d, intersection_1d, intersection_2d, random_distribution,
    random_mixture, unique_maximizer_mixture,
};
use crate::distribution::{alpha_divergence, DenseDistribution};
use crate::error::{Error, Result};
use crate::mixture::{log_normalizer_z, tilted_distribution, GuidanceConfig, MixtureModel};
use crate::numerics::TimeRatio;
use crate::oracle::evolve_exact;
use crate::rates::guided_reverse;
use crate::samplers::{chi_square_test, empirical_distribution, sample_exact_event, sample_tau_leaping};
use crate::space::StateSpace;

pub const CRITERIA: usize = 11;
/// Horizon shared by every check.
pub const HORIZON: f64 = 1.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub quick: bool,
    pub fault_injection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    /// `PASS [3] name: detail (0.12 s)`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

const NAMES: [&str; CRITERIA] = [
    "no initialization error",
    "1D guided terminal law",
    "exact TV law",
    "2D closed form vs oracle",
    "2D sampled distribution",
    "normalizer properties",
    "region structure",
    "double-exponential decay",
    "local moments",
    "samplers",
    "figure scenarios",
];

/// Runtime budgets in seconds; `None` when none is set.
const BUDGETS: [Option<f64>; CRITERIA] = [
    Some(1.0),
    Some(5.0),
    Some(5.0),
    Some(60.0),
    None,
    None,
    None,
    None,
    None,
    Some(120.0),
    None,
];

/// Interior grid `T k / 10`, `k = 1..9`.
pub fn interior_times(horizon: f64) -> Vec<f64> {
    (1..=9).map(|k| horizon * k as f64 / 10.0).collect()
}

/// Outcome of one check body: pass flag and a one-line summary.
type Outcome = Result<(bool, String)>;

pub fn run_criterion(id: usize, opts: &ValidationOptions) -> Result<CriterionReport> {
    if !(1..=CRITERIA).contains(&id) {
        return Err(Error::InvalidArgument(format!("criterion {id} out of range 1..={CRITERIA}")));
    }
    let start = Instant::now();
    let outcome = match id {
        1 => no_initialization_error(opts),
        2 => guided_terminal_1d(opts),
        3 => exact_tv_law(opts),
        4 => closed_form_2d(opts),
        5 => sampled_2d(opts),
        6 => normalizer_properties(opts),
        7 => region_structure(opts),
        8 => double_exponential_decay(opts),
        9 => local_moment_preservation(opts),
        10 => sampler_correctness(opts),
        _ => figure_scenarios(opts),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(budget) = BUDGETS[id - 1] {
        if !opts.quick && seconds >= budget {
            passed = false;
            detail.push_str(&format!("; over the {budget} s budget"));
        }
    }
    Ok(CriterionReport {
        id,
        name: NAMES[id - 1].to_string(),
        passed,
        detail,
        seconds,
    })
}

pub fn run_all(opts: &ValidationOptions) -> Vec<CriterionReport> {
    (1..=CRITERIA)
        .map(|id| run_criterion(id, opts).expect("id in range"))
        .collect()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Ok((ok, detail))
}

fn mixtures_1d(count: u64, seed0: u64) -> Result<Vec<MixtureModel>> {
    (0..count)
        .map(|s| random_mixture(seed0 + s, 1, 3 + (s % 6) as usize, 2 + (s % 2) as usize, 0.7))
        .collect()
}

/// Mixtures for the 2D oracle comparison; `N` cycles through 3, 4, 5.
pub fn mixtures_2d(count: u64, seed0: u64) -> Result<Vec<MixtureModel>> {
    (0..count)
        .map(|s| random_mixture(seed0 + s, 2, 3 + (s % 3) as usize, 2 + (s % 2) as usize, 0.8))
        .collect()
}

fn no_initialization_error(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 5 } else { 20 };
    let mut worst = 0.0f64;
    for seed in 0..count {
        let space = StateSpace::new(1, 3 + (seed % 8) as usize)?;
        let p = random_distribution(seed, space, 0.8)?;
        let q = solve_1d_unguided(&p, HORIZON, HORIZON)?;
        worst = worst.max(q.max_abs_diff(&p)?);
    }
    verdict(worst <= 1e-12, format!("{count} distributions, max-abs {worst:.2e}"))
}

const W_1D: [f64; 5] = [-1.0, 0.0, 0.5, 2.0, 10.0];

fn guided_terminal_1d(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 2 } else { 5 };
    let mut terminal = 0.0f64;
    let mut oracle = 0.0f64;
    let times = interior_times(HORIZON);
    for m in mixtures_1d(count, 10)? {
        for &w in &W_1D {
            let g = GuidanceConfig::new(0, w)?;
            let q = solve_1d_guided(&m, &g, HORIZON, HORIZON)?;
            terminal = terminal.max(q.max_abs_diff(&tilted_distribution(&m, &g)?)?);
            let gen = guided_reverse(&m, &g)?;
            let start = DenseDistribution::point_mass(m.space(), m.space().all_mask_index());
            let sol = evolve_exact(&gen, HORIZON, &times, &start)?;
            for (t, d) in times.iter().zip(&sol.densities) {
                oracle = oracle.max(solve_1d_guided(&m, &g, HORIZON, *t)?.max_abs_diff(d)?);
            }
        }
    }
    verdict(
        terminal <= 1e-12 && oracle <= 1e-8,
        format!("{count} mixtures x {} w: terminal {terminal:.2e}, oracle {oracle:.2e}", W_1D.len()),
    )
}

/// Cutoff below which TV is compared through its logarithm.
const UNDERFLOW_TV: f64 = 1e-280;

fn exact_tv_law(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 3 } else { 10 };
    let mut worst = 0.0f64;
    let mut worst_log = 0.0f64;
    let mut checked = 0usize;
    let times = interior_times(HORIZON);
    for m in mixtures_1d(count, 40)? {
        for &w in &W_1D {
            let g = GuidanceConfig::new(0, w)?;
            let tilt = tilted_distribution(&m, &g)?;
            let z = log_normalizer_z(&m, &g)?.exp();
            let curve = tv_curve_1d_closed(&m, &g, HORIZON, &times)?;
            for (k, &t) in times.iter().enumerate() {
                let tr = TimeRatio::new(HORIZON, t)?;
                let law = z * tr.ln_r;
                let got = tv(&solve_1d_guided(&m, &g, HORIZON, t)?, &tilt)?;
                if law.exp() > UNDERFLOW_TV {
                    worst = worst.max((got - law.exp()).abs());
                } else {
                    worst_log = worst_log.max(((curve.log_values[k] - law) / law).abs());
                }
                checked += 1;
            }
        }
    }
    verdict(
        worst <= 1e-10 && worst_log <= 1e-10,
        format!("{checked} points: max-abs {worst:.2e}, log rel {worst_log:.2e}"),
    )
}

const W_2D: [f64; 4] = [0.0, 0.5, 1.0, 3.0];

fn closed_form_2d(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 3 } else { 10 };
    let times = interior_times(HORIZON);
    let mut worst = 0.0f64;
    for m in mixtures_2d(count, 0)? {
        for &w in &W_2D {
            let g = GuidanceConfig::new(0, w)?;
            let gen = guided_reverse(&m, &g)?;
            let start = DenseDistribution::point_mass(m.space(), m.space().all_mask_index());
            let sol = evolve_exact(&gen, HORIZON, &times, &start)?;
            for (t, d) in times.iter().zip(&sol.densities) {
                worst = worst.max(solve_2d_guided(&m, &g, HORIZON, *t)?.max_abs_diff(d)?);
            }
        }
    }
    verdict(
        worst <= 1e-8,
        format!("{count} mixtures x {} w x {} times: max-abs {worst:.2e}", W_2D.len(), times.len()),
    )
}

fn sampled_2d(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 3 } else { 10 };
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    for m in mixtures_2d(count, 0)? {
        for &w in &W_2D {
            let g = GuidanceConfig::new(0, w)?;
            let mut coef = coefficients_2d(&m, &g)?;
            if opts.fault_injection {
                coef.ln_c[0] += 0.1;
            }
            let q = sampled_from_coefficients(&coef, m.space())?;
            let gen = guided_reverse(&m, &g)?;
            let start = DenseDistribution::point_mass(m.space(), m.space().all_mask_index());
            let sol = evolve_exact(&gen, HORIZON, &[HORIZON], &start)?;
            worst = worst.max(q.max_abs_diff(&sol.densities[0])?);
            drift = drift.max((q.probs().iter().sum::<f64>() - 1.0).abs());
        }
    }
    verdict(
        worst <= 1e-8 && drift <= 1e-10,
        format!("{count} mixtures x {} w: max-abs {worst:.2e}, |sum-1| {drift:.2e}", W_2D.len()),
    )
}

const W_Z: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

fn normalizer_properties(opts: &ValidationOptions) -> Outcome {
    let count = if opts.quick { 5 } else { 20 };
    let mut failures = Vec::new();
    let mut divergence_err = 0.0f64;
    for s in 0..count {
        let m = if s % 2 == 0 {
            random_mixture(60 + s, 1, 4 + (s % 5) as usize, 3, 0.7)?
        } else {
            random_mixture(60 + s, 2, 4, 2, 0.7)?
        };
        let mut prev = f64::NEG_INFINITY;
        for &w in &W_Z {
            let g = GuidanceConfig::new(0, w)?;
            let lz = log_normalizer_z(&m, &g)?;
            if lz < -1e-12 || lz < prev - 1e-12 {
                failures.push(format!("seed {s} w {w}: ln Z {lz}"));
            }
            prev = lz;
            let expected = if w == 0.0 {
                0.0
            } else {
                w * alpha_divergence(m.conditional(0), m.full(), 1.0 + w)?
            };
            divergence_err = divergence_err.max((lz - expected).abs());
        }
    }
    let mut slope_err = 0.0f64;
    for s in 0..count {
        let m = unique_maximizer_mixture(500 + s, 1 + (s % 2) as usize, if s % 2 == 0 { 6 } else { 4 })?;
        let at = |w: f64| -> Result<f64> { log_normalizer_z(&m, &GuidanceConfig::new(0, w)?) };
        let slope = at(50.5)? - at(49.5)?;
        let target = crate::analysis::log_sup_ratio(&m, 0);
        slope_err = slope_err.max(((slope - target) / target).abs());
    }
    verdict(
        failures.is_empty() && divergence_err <= 1e-10 && slope_err <= 0.05,
        format!(
            "{count} mixtures: {} order violations, divergence err {divergence_err:.2e}, large-w slope rel err {slope_err:.2e}",
            failures.len()
        ),
    )
}

fn coords_set(rd: &crate::analysis::RegionDecomposition, region: Region) -> BTreeSet<Vec<usize>> {
    rd.member_coords(region).into_iter().collect()
}

/// Random 2D mixtures whose large-`w` limit exists and is approached at
/// `w = 200`: some R1 or R2 state, and every shared marginal ratio at most
/// `0.9`.
pub fn limit_corpus(count: usize) -> Result<Vec<MixtureModel>> {
    let mut out = Vec::new();
    let mut seed = 200u64;
    while out.len() < count {
        let m = random_mixture(seed, 2, 5, 2, 0.5)?;
        seed += 1;
        let rd = region_decomposition_2d(&m, "z1")?;
        let has_limit = rd
            .states
            .iter()
            .any(|s| matches!(s.region, Region::R1 | Region::R21 | Region::R22));
        let slow = rd
            .states
            .iter()
            .flat_map(|s| s.marginal_ratios)
            .any(|r| r < 1.0 - 1e-12 && r > 0.9);
        if has_limit && !slow {
            out.push(m);
        }
        if seed > 10_000 {
            return Err(Error::DegenerateInput("limit corpus exhausted".into()));
        }
    }
    Ok(out)
}

fn region_structure(opts: &ValidationOptions) -> Outcome {
    let m = block_overlap_2d()?;
    let rd = region_decomposition_2d(&m, "z1")?;
    let expect = |cells: &[[usize; 2]]| cells.iter().map(|c| c.to_vec()).collect::<BTreeSet<_>>();
    let sets_ok = coords_set(&rd, Region::R1) == expect(&[[1, 1]])
        && coords_set(&rd, Region::R21) == expect(&[[2, 1], [3, 1]])
        && coords_set(&rd, Region::R22) == expect(&[[1, 2], [1, 3]])
        && coords_set(&rd, Region::R3).is_empty()
        && coords_set(&rd, Region::R4) == expect(&[[2, 2], [2, 3], [3, 2], [3, 3]]);
    let limit = limit_distribution_2d(&rd, &m)?;
    let space = m.space();
    let mut target = vec![0.0; space.total_states()];
    target[space.index_of(&[1, 1])?] = 1.0 / 3.0;
    for c in [[2, 1], [3, 1], [1, 2], [1, 3]] {
        target[space.index_of(&c)?] = 1.0 / 6.0;
    }
    let limit_err = limit.max_abs_diff(&DenseDistribution::new(space, target)?)?;
    let mut approach = sampled_distribution_2d(&m, &GuidanceConfig::new(0, 200.0)?)?.max_abs_diff(&limit)?;
    for m in limit_corpus(if opts.quick { 2 } else { 5 })? {
        let rd = region_decomposition_2d(&m, "z1")?;
        let limit = limit_distribution_2d(&rd, &m)?;
        let q = sampled_distribution_2d(&m, &GuidanceConfig::new(0, 200.0)?)?;
        approach = approach.max(q.max_abs_diff(&limit)?);
    }
    let count = if opts.quick { 10 } else { 50 };
    let mut ordering_failures = 0usize;
    for s in 0..count {
        let m = random_mixture(700 + s, 2, 3 + (s % 4) as usize, 2 + (s % 3) as usize, 0.6)?;
        let rd = region_decomposition_2d(&m, "z1")?;
        for w in [0.0, 0.5, 1.0, 4.0, 16.0] {
            if !rd.ordering_holds(w) {
                ordering_failures += 1;
            }
        }
    }
    verdict(
        sets_ok && limit_err <= 1e-12 && approach <= 1e-6 && ordering_failures == 0,
        format!(
            "regions {}, limit err {limit_err:.2e}, w=200 gap {approach:.2e}, ordering failures {ordering_failures}/{}",
            if sets_ok { "match" } else { "differ" },
            count * 5
        ),
    )
}

fn double_exponential_decay(opts: &ValidationOptions) -> Outcome {
    let t0 = 0.9 * HORIZON;
    let ws: Vec<f64> = (2..=8).map(f64::from).collect();
    let tr = TimeRatio::new(HORIZON, t0)?;
    let offset = (-tr.ln_r).ln();
    let mut err_1d = 0.0f64;
    for m in mixtures_1d(if opts.quick { 2 } else { 5 }, 80)? {
        for &w in &ws {
            let g = GuidanceConfig::new(0, w)?;
            let curve = tv_curve_1d_closed(&m, &g, HORIZON, &[t0])?;
            let lhs = (-curve.log_values[0]).ln();
            err_1d = err_1d.max((lhs - log_normalizer_z(&m, &g)? - offset).abs());
        }
    }
    let count = if opts.quick { 2 } else { 5 };
    let mut min_slope = f64::INFINITY;
    let mut max_residual = 0.0f64;
    for s in 0..count {
        let m = random_mixture(100 + s, 2, 4, 2, 1.0)?;
        let curves = ws
            .iter()
            .map(|&w| tv_curve_2d(&m, &GuidanceConfig::new(0, w)?, HORIZON, &[t0]))
            .collect::<Result<Vec<_>>>()?;
        let fit = decay_exponent_fit(&curves, t0)?;
        min_slope = min_slope.min(fit.slope);
        max_residual = max_residual.max(fit.max_residual);
    }
    verdict(
        err_1d <= 1e-10 && min_slope > 0.0 && max_residual <= 0.3,
        format!("1D offset err {err_1d:.2e}; 2D min slope {min_slope:.3}, max residual {max_residual:.3}"),
    )
}

fn local_moment_preservation(opts: &ValidationOptions) -> Outcome {
    let mut corpus = vec![intersection_1d()?];
    let mut seed = 900u64;
    while corpus.len() < if opts.quick { 3 } else { 8 } {
        let m = random_mixture(seed, 1, 8, 2, 0.7)?;
        seed += 1;
        if !private_states(&m, 0).is_empty() && !shared_states(&m, 0).is_empty() {
            corpus.push(m);
        }
    }
    let mut restr = 0.0f64;
    let mut moments = 0.0f64;
    for m in &corpus {
        let private = private_states(m, 0);
        let reference = restrict(m.conditional(0), &private)?;
        let ref_moments = local_moments(m.conditional(0), &private)?;
        for w in [0.0, 1.0, 5.0] {
            let q = solve_1d_guided(m, &GuidanceConfig::new(0, w)?, HORIZON, HORIZON)?;
            restr = restr.max(restrict(&q, &private)?.max_abs_diff(&reference)?);
            let lm = local_moments(&q, &private)?;
            moments = moments.max((lm.mean[0] - ref_moments.mean[0]).abs());
            moments = moments.max((lm.covariance[0][0] - ref_moments.covariance[0][0]).abs());
        }
    }
    verdict(
        restr <= 1e-12 && moments <= 1e-12,
        format!("{} mixtures: restriction {restr:.2e}, moments {moments:.2e}", corpus.len()),
    )
}

pub const TAU_STEPS: [usize; 4] = [25, 50, 200, 800];

/// Half the expected L1 sampling error of an `n`-sample histogram of `p`,
/// `0.5 sum sqrt(2 p (1-p) / (pi n))`.
pub fn tv_noise_floor(p: &DenseDistribution, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * p
        .probs()
        .iter()
        .map(|&v| (2.0 * v * (1.0 - v) / (std::f64::consts::PI * nf)).sqrt())
        .sum::<f64>()
}

fn sampler_correctness(opts: &ValidationOptions) -> Outcome {
    let n = if opts.quick { 20_000 } else { 200_000 };
    let g = GuidanceConfig::new(0, 1.0)?;
    let mut chi_fail = Vec::new();
    let mut min_p = 1.0f64;
    let mut corpus_1d = vec![intersection_1d()?];
    corpus_1d.extend(mixtures_1d(2, 120)?);
    for (k, m) in corpus_1d.iter().enumerate() {
        let gen = guided_reverse(m, &g)?;
        let batch = sample_exact_event(&gen, HORIZON, n, 11 + k as u64)?;
        let chi = chi_square_test(&batch.counts(), &tilted_distribution(m, &g)?, 1e-3)?;
        min_p = min_p.min(chi.p_value);
        if !chi.passes() {
            chi_fail.push(format!("1D #{k}"));
        }
    }
    let corpus_2d: Vec<MixtureModel> = (0..3)
        .map(|s| random_mixture(300 + s, 2, 4, 2, 0.8))
        .collect::<Result<_>>()?;
    for (k, m) in corpus_2d.iter().enumerate() {
        let gen = guided_reverse(m, &g)?;
        let batch = sample_exact_event(&gen, HORIZON, n, 21 + k as u64)?;
        let chi = chi_square_test(&batch.counts(), &sampled_distribution_2d(m, &g)?, 1e-3)?;
        min_p = min_p.min(chi.p_value);
        if !chi.passes() {
            chi_fail.push(format!("2D #{k}"));
        }
    }
    let mut tau_fail = Vec::new();
    let mut tv_rows = Vec::new();
    for (k, m) in corpus_2d.iter().take(2).enumerate() {
        let gen = guided_reverse(m, &g)?;
        let exact = sampled_distribution_2d(m, &g)?;
        let band = tv_noise_floor(&exact, n);
        let tvs = TAU_STEPS
            .iter()
            .map(|&steps| {
                let b = sample_tau_leaping(&gen, HORIZON, steps, n, 31 + k as u64)?;
                tv(&empirical_distribution(&b)?, &exact)
            })
            .collect::<Result<Vec<f64>>>()?;
        let stepwise = tvs.windows(2).all(|p| p[1] <= p[0] + 2.0 * band);
        if !stepwise || tvs[TAU_STEPS.len() - 1] >= tvs[0] {
            tau_fail.push(format!("2D #{k}"));
        }
        tv_rows.push(tvs.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(">"));
    }
    verdict(
        chi_fail.is_empty() && tau_fail.is_empty(),
        format!(
            "n={n}: chi-square min p {min_p:.3}, failures {:?}; tau-leaping TV {}; failures {:?}",
            chi_fail,
            tv_rows.join(", "),
            tau_fail
        ),
    )
}

const W_FIG: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0];

fn terminal_law(m: &MixtureModel, w: f64) -> Result<DenseDistribution> {
    let g = GuidanceConfig::new(0, w)?;
    if m.space().dims() == 1 {
        solve_1d_guided(m, &g, HORIZON, HORIZON)
    } else {
        sampled_distribution_2d(m, &g)
    }
}

fn figure_scenarios(_opts: &ValidationOptions) -> Outcome {
    let mut invariance = 0.0f64;
    for m in [disjoint_1d()?, disjoint_2d()?] {
        let base = terminal_law(&m, 0.0)?;
        for &w in &W_FIG[1..] {
            invariance = invariance.max(terminal_law(&m, w)?.max_abs_diff(&base)?);
        }
    }
    let mut decreasing = true;
    let mut final_mass = 0.0f64;
    for m in [intersection_1d()?, intersection_2d()?] {
        let shared = shared_states(&m, 0);
        let mut prev = f64::INFINITY;
        for &w in &W_FIG {
            let q = terminal_law(&m, w)?;
            let mass: f64 = shared.iter().map(|&x| q.prob(x)).sum();
            decreasing &= mass < prev;
            prev = mass;
        }
        final_mass = final_mass.max(prev);
    }
    verdict(
        invariance <= 1e-10 && decreasing && final_mass <= 1e-6,
        format!(
            "disjoint change {invariance:.2e}; overlap mass {} in w, {final_mass:.2e} at w=100",
            if decreasing { "strictly decreasing" } else { "not decreasing" }
        ),
    )
}

