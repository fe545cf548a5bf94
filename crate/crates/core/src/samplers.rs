//! Stochastic samplers of the reverse dynamics with exact scores.
//!
//! Each particle draws from its own ChaCha8 stream selected by the particle
//! index, so batches are reproducible bit for bit regardless of how the
//! particles are scheduled.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::numerics::TimeRatio;
use crate::rates::ReverseGenerator;
use crate::space::StateSpace;

/// Target bound on the residual mask mass at the tau-leaping cutoff.
const CUTOFF_MASS: f64 = 1e-9;
/// Cap on self-loop events of the uniformization sampler per particle.
const VIRTUAL_EVENT_CAP: u64 = 100_000_000;
/// Expected count below which chi-square bins are pooled.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    TauLeaping { steps: usize },
    ExactEvent,
    Uniformization { rate: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::TauLeaping { .. } => "tau-leaping",
            Scheme::ExactEvent => "exact-event",
            Scheme::Uniformization { .. } => "uniformization",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Poisson events beyond the first per coordinate and interval.
    pub excess_events: u64,
    /// Coordinates still masked at the tau-leaping cutoff.
    pub resolved_at_cutoff: u64,
    /// Self-loop events of the uniformization sampler.
    pub virtual_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub space: StateSpace,
    /// Terminal states as flat indices.
    pub samples: Vec<usize>,
    pub seed: u64,
    pub scheme: Scheme,
    pub wall_time: f64,
    pub diagnostics: SamplerDiagnostics,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Histogram of terminal states.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.space.total_states()];
        for &s in &self.samples {
            counts[s] += 1;
        }
        counts
    }
}

fn particle_rng(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    rng
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    Ok(())
}

/// Picks a transition out of `x` with probability proportional to its rate.
fn pick<R: Rng>(gen: &ReverseGenerator, x: usize, total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = x;
    for (y, v) in gen.transitions(x) {
        acc += v;
        last = y;
        if u < acc {
            return y;
        }
    }
    last
}

/// Runs the embedded jump chain from `x` until an absorbing state.
fn run_jump_chain<R: Rng>(gen: &ReverseGenerator, mut x: usize, rng: &mut R) -> Result<usize> {
    let space = gen.space();
    let limit = 10 * space.dims();
    let mut events = 0;
    loop {
        let exit = gen.exit_rate(x);
        if exit == 0.0 {
            if space.is_unmasked(x) {
                return Ok(x);
            }
            return Err(Error::DeadEnd(x));
        }
        events += 1;
        if events > limit {
            return Err(Error::EventOverflow { limit });
        }
        x = pick(gen, x, exit, rng);
    }
}

/// Event-driven simulation in the time-changed clock `s = ln(1/r(t))`.
///
/// The clock runs to infinity at `t = T`, so the terminal state is the
/// absorption point of the embedded jump chain started from the all-mask
/// state; holding times do not affect it and are not drawn.
pub fn sample_exact_event(gen: &ReverseGenerator, horizon: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    check_n(n)?;
    TimeRatio::new(horizon, 0.0)?;
    let start = Instant::now();
    let init = gen.space().all_mask_index();
    let samples = (0..n)
        .map(|i| run_jump_chain(gen, init, &mut particle_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        space: gen.space(),
        samples,
        seed,
        scheme: Scheme::ExactEvent,
        wall_time: start.elapsed().as_secs_f64(),
        diagnostics: SamplerDiagnostics::default(),
    })
}

/// Uniformized simulation: candidate events at the constant rate
/// `Lambda = max exit rate` in the `s` clock, each accepted with
/// probability `exit(x) / Lambda`.
pub fn sample_uniformization(gen: &ReverseGenerator, horizon: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    check_n(n)?;
    TimeRatio::new(horizon, 0.0)?;
    let start = Instant::now();
    let space = gen.space();
    let lambda = gen.max_exit_rate();
    let limit = 10 * space.dims();
    let mut diagnostics = SamplerDiagnostics::default();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = particle_rng(seed, i);
        let mut x = space.all_mask_index();
        let mut real = 0;
        let mut virtual_events = 0u64;
        loop {
            let exit = gen.exit_rate(x);
            if exit == 0.0 {
                if !space.is_unmasked(x) {
                    return Err(Error::DeadEnd(x));
                }
                break;
            }
            if rng.random::<f64>() * lambda < exit {
                real += 1;
                if real > limit {
                    return Err(Error::EventOverflow { limit });
                }
                x = pick(gen, x, exit, &mut rng);
            } else {
                virtual_events += 1;
                if virtual_events > VIRTUAL_EVENT_CAP {
                    return Err(Error::EventOverflow {
                        limit: VIRTUAL_EVENT_CAP as usize,
                    });
                }
            }
        }
        diagnostics.virtual_events += virtual_events;
        samples.push(x);
    }
    Ok(SampleBatch {
        space,
        samples,
        seed,
        scheme: Scheme::Uniformization { rate: lambda },
        wall_time: start.elapsed().as_secs_f64(),
        diagnostics,
    })
}

/// Cutoff time `T - eps` of the tau-leaping grid.
///
/// The decay exponent of the residual mask mass is taken as
/// `min(1, exit([M]) / D)`, which equals `min(Z, 1)` in one dimension.
pub fn tau_leaping_cutoff(gen: &ReverseGenerator, horizon: f64) -> f64 {
    let space = gen.space();
    let rate = gen.exit_rate(space.all_mask_index()) / space.dims() as f64;
    let exponent = rate.clamp(f64::MIN_POSITIVE, 1.0);
    let r_end = 0.5 * CUTOFF_MASS.powf(1.0 / exponent);
    // invert r = (1 - e^{-(T - t)}) / (1 - e^{-T})
    let eps = -(-r_end * -(-horizon).exp_m1()).ln_1p();
    (horizon - eps).max(0.0)
}

/// Tau-leaping with `steps` uniform intervals on `[0, T - eps]`.
///
/// In every interval each masked coordinate draws a Poisson count with
/// intensity equal to its summed unmasking rate integrated over the
/// interval; a positive count unmasks it to a token chosen proportionally
/// to the individual rates, and the surplus is recorded as excess. Masks
/// left at the cutoff are resolved by the exact jump chain.
pub fn sample_tau_leaping(
    gen: &ReverseGenerator,
    horizon: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_n(n)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("tau-leaping needs at least one step".into()));
    }
    let start = Instant::now();
    let space = gen.space();
    let n_tok = space.alphabet();
    let t_end = tau_leaping_cutoff(gen, horizon);
    let grid: Vec<f64> = (0..=steps)
        .map(|k| TimeRatio::new(horizon, t_end * k as f64 / steps as f64).map(|tr| tr.log_time_change()))
        .collect::<Result<_>>()?;
    let dims = space.dims();
    let mut coord_rates = vec![0.0; space.total_states() * dims];
    for x in 0..space.total_states() {
        for (y, v) in gen.transitions(x) {
            coord_rates[x * dims + changed_coord(space, x, y)] += v;
        }
    }
    let mut diagnostics = SamplerDiagnostics::default();
    let mut samples = Vec::with_capacity(n);
    let mut moves: Vec<usize> = Vec::with_capacity(dims);
    for i in 0..n {
        let mut rng = particle_rng(seed, i);
        let mut x = space.all_mask_index();
        // exponential clock over the piecewise-constant hazard; skips quiet intervals
        let mut clock = -rng.random::<f64>().ln();
        for k in 0..steps {
            let exit = gen.exit_rate(x);
            if exit == 0.0 {
                break;
            }
            let ds = grid[k + 1] - grid[k];
            clock -= exit * ds;
            if clock > 0.0 {
                continue;
            }
            let per_coord = &coord_rates[x * dims..(x + 1) * dims];
            // conditioned on at least one event, draw the per-coordinate counts
            moves.clear();
            let mut counts = vec![0u64; dims];
            while counts.iter().all(|&c| c == 0) {
                for d in 0..dims {
                    counts[d] = if per_coord[d] > 0.0 { poisson_count(per_coord[d] * ds, &mut rng)? } else { 0 };
                }
            }
            for d in 0..dims {
                let rate = per_coord[d];
                let count = counts[d];
                if count == 0 {
                    continue;
                }
                diagnostics.excess_events += count - 1;
                let u = rng.random::<f64>() * rate;
                let mut acc = 0.0;
                let mut choice = None;
                for (y, v) in gen.transitions(x) {
                    if changed_coord(space, x, y) != d {
                        continue;
                    }
                    acc += v;
                    choice = Some(space.digit(y, d));
                    if u < acc {
                        break;
                    }
                }
                if let Some(digit) = choice {
                    moves.push(d * n_tok + digit);
                }
            }
            for &mv in &moves {
                x = space.with_digit(x, mv / n_tok, mv % n_tok);
            }
            clock = -rng.random::<f64>().ln();
        }
        if !space.is_unmasked(x) {
            diagnostics.resolved_at_cutoff += space.masked_count(x) as u64;
            x = run_jump_chain(gen, x, &mut rng)?;
        }
        samples.push(x);
    }
    Ok(SampleBatch {
        space,
        samples,
        seed,
        scheme: Scheme::TauLeaping { steps },
        wall_time: start.elapsed().as_secs_f64(),
        diagnostics,
    })
}

/// Poisson draw; small means use inverse transform on one uniform.
fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean < 30.0 {
        let u = rng.random::<f64>();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return Ok(k);
    }
    Ok(Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as u64)
}

fn changed_coord(space: StateSpace, x: usize, y: usize) -> usize {
    (0..space.dims())
        .find(|&d| space.digit(x, d) != space.digit(y, d))
        .expect("transition changes one coordinate")
}

/// Normalized histogram of a batch.
pub fn empirical_distribution(b: &SampleBatch) -> Result<DenseDistribution> {
    check_n(b.samples.len())?;
    let n = b.samples.len() as f64;
    DenseDistribution::new(b.space, b.counts().iter().map(|&c| c as f64 / n).collect())
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Statistic threshold at the requested significance.
    pub critical: f64,
}

impl ChiSquareTest {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Chi-square test of observed counts against `expected` probabilities at
/// significance `alpha`. Cells with expected count below 5 are pooled.
pub fn chi_square_test(counts: &[u64], expected: &DenseDistribution, alpha: f64) -> Result<ChiSquareTest> {
    if counts.len() != expected.probs().len() {
        return Err(Error::SpaceMismatch);
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(expected.probs()) {
        let e = p * nf;
        if e == 0.0 {
            if c > 0 {
                return Err(Error::SupportViolation(
                    counts.iter().zip(expected.probs()).position(|(&c, &p)| c > 0 && p == 0.0).unwrap_or(0),
                ));
            }
            continue;
        }
        if e < MIN_EXPECTED {
            pooled.0 += c as f64;
            pooled.1 += e;
        } else {
            bins.push((c as f64, e));
        }
    }
    if pooled.1 > 0.0 {
        if pooled.1 >= MIN_EXPECTED || bins.is_empty() {
            bins.push(pooled);
        } else {
            let k = (0..bins.len())
                .min_by(|&a, &b| bins[a].1.total_cmp(&bins[b].1))
                .expect("nonempty");
            bins[k].0 += pooled.0;
            bins[k].1 += pooled.1;
        }
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    if dof == 0 {
        return Ok(ChiSquareTest {
            statistic,
            dof,
            p_value: 1.0,
            critical: f64::INFINITY,
        });
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        critical: dist.inverse_cdf(1.0 - alpha),
    })
}
