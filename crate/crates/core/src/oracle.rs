//! Brute-force reference solutions of the reverse dynamics for any `D`.
//!
//! With the time change `s(t) = ln(1/r(t))` the reverse equation becomes
//! `dq/ds = base * q`, so `q_t = exp(s(t) base) q_0`. The exponential is
//! applied by uniformization: a Poisson mixture of powers of the stochastic
//! matrix `I + base / Lambda`. Every transition unmasks a coordinate, so
//! the `t = T` limit is the absorption law of the jump chain, propagated
//! exactly in order of decreasing mask count.

use serde::{Deserialize, Serialize};

use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::numerics::{time_factor, TimeRatio};
use crate::rates::ReverseGenerator;

/// Largest Poisson mean handled in one uniformization chunk.
const CHUNK_MEAN: f64 = 50.0;
/// Truncation bound per chunk on the neglected Poisson tail.
const TAIL_TOL: f64 = 1e-17;
/// Cap on matrix-vector products for one solve.
pub const TERM_BUDGET: usize = 5_000_000;
/// Most negative entry an ODE step may produce.
const NEGATIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    MatrixExponential,
    Ode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub times: Vec<f64>,
    pub densities: Vec<DenseDistribution>,
    pub method: OracleMethod,
    /// Accumulated truncation bound (uniformization) or the step used (ODE).
    pub tolerance: f64,
}

struct Uniformizer<'a> {
    gen: &'a ReverseGenerator,
    lambda: f64,
    scratch: Vec<f64>,
    terms: usize,
}

impl<'a> Uniformizer<'a> {
    fn new(gen: &'a ReverseGenerator) -> Self {
        Self {
            gen,
            lambda: gen.max_exit_rate(),
            scratch: vec![0.0; gen.space().total_states()],
            terms: 0,
        }
    }

    /// `v <- P v` with `P = I + base / Lambda`.
    fn step(&mut self, v: &mut [f64]) {
        self.gen.apply(v, &mut self.scratch);
        for (vi, bi) in v.iter_mut().zip(&self.scratch) {
            *vi += bi / self.lambda;
        }
        self.terms += 1;
    }

    /// `q <- exp(s base) q`; returns the truncation bound.
    fn advance(&mut self, q: &mut Vec<f64>, s: f64) -> f64 {
        if s <= 0.0 || self.lambda == 0.0 {
            return 0.0;
        }
        let total_mean = self.lambda * s;
        let chunks = (total_mean / CHUNK_MEAN).ceil().max(1.0) as usize;
        let mu = total_mean / chunks as f64;
        let mut bound = 0.0;
        for _ in 0..chunks {
            let mut power = q.clone();
            let mut weight = (-mu).exp();
            let mut acc: Vec<f64> = power.iter().map(|v| weight * v).collect();
            let mut k = 0usize;
            loop {
                k += 1;
                weight *= mu / k as f64;
                self.step(&mut power);
                for (a, p) in acc.iter_mut().zip(&power) {
                    *a += weight * p;
                }
                let kk = k as f64;
                if kk + 2.0 > mu {
                    let next = weight * mu / (kk + 1.0);
                    let tail = next / (1.0 - mu / (kk + 2.0));
                    if tail < TAIL_TOL {
                        bound += tail;
                        break;
                    }
                }
            }
            *q = acc;
        }
        bound
    }
}

/// Pushes all mass off states with positive exit rate along the jump chain.
fn absorb(gen: &ReverseGenerator, q: &mut [f64]) {
    let space = gen.space();
    let mut order: Vec<usize> = (0..q.len()).filter(|&x| gen.exit_rate(x) > 0.0).collect();
    order.sort_by_key(|&x| std::cmp::Reverse(space.masked_count(x)));
    for x in order {
        let mass = std::mem::take(&mut q[x]);
        if mass == 0.0 {
            continue;
        }
        let exit = gen.exit_rate(x);
        for (y, v) in gen.transitions(x) {
            q[y] += mass * v / exit;
        }
    }
}

/// Matrix-vector products uniformization needs to reach time `t`.
pub fn uniformization_terms(gen: &ReverseGenerator, horizon: f64, t: f64) -> Result<f64> {
    let tr = TimeRatio::new(horizon, t)?;
    Ok(if tr.r > 0.0 { gen.max_exit_rate() * tr.log_time_change() } else { 0.0 })
}

fn to_density(gen: &ReverseGenerator, mut q: Vec<f64>) -> Result<DenseDistribution> {
    for v in q.iter_mut() {
        if *v < 0.0 && *v > -NEGATIVITY_TOL {
            *v = 0.0;
        }
    }
    DenseDistribution::from_weights(gen.space(), q)
}

fn check_times(horizon: f64, times: &[f64]) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon T = {horizon} must be positive")));
    }
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidArgument("output times must be nondecreasing".into()));
        }
    }
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, {horizon}]")));
    }
    Ok(())
}

/// `q_t = exp(ln(1/r(t)) base) q_0` at each requested time.
///
/// `t = T` is served by the absorption limit. Fails with
/// [`Error::TermBudget`] when the series would need more than
/// [`TERM_BUDGET`] products, which happens for very stiff generators.
pub fn evolve_exact(
    gen: &ReverseGenerator,
    horizon: f64,
    times: &[f64],
    q0: &DenseDistribution,
) -> Result<OracleSolution> {
    if q0.space() != gen.space() {
        return Err(Error::SpaceMismatch);
    }
    check_times(horizon, times)?;
    if let Some(t) = times.iter().copied().filter(|&t| t < horizon).reduce(f64::max) {
        let needed = uniformization_terms(gen, horizon, t)?;
        if needed > TERM_BUDGET as f64 {
            return Err(Error::TermBudget {
                needed,
                budget: TERM_BUDGET,
            });
        }
    }
    let mut uni = Uniformizer::new(gen);
    let mut q = q0.probs().to_vec();
    let mut s_prev = 0.0;
    let mut bound = 0.0;
    let mut densities = Vec::with_capacity(times.len());
    for &t in times {
        let tr = TimeRatio::new(horizon, t)?;
        if tr.r > 0.0 {
            let s = tr.log_time_change();
            bound += uni.advance(&mut q, s - s_prev);
            s_prev = s;
        } else {
            absorb(gen, &mut q);
        }
        densities.push(to_density(gen, q.clone())?);
    }
    Ok(OracleSolution {
        times: times.to_vec(),
        densities,
        method: OracleMethod::MatrixExponential,
        tolerance: bound,
    })
}

/// Classical RK4 on `dq/dt = time_factor(T - t) base q` with equal
/// substeps no longer than `step` between consecutive output times.
pub fn evolve_ode(
    gen: &ReverseGenerator,
    horizon: f64,
    times: &[f64],
    q0: &DenseDistribution,
    step: f64,
) -> Result<OracleSolution> {
    if q0.space() != gen.space() {
        return Err(Error::SpaceMismatch);
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    check_times(horizon, times)?;
    if let Some(&t) = times.iter().find(|&&t| t > horizon - step) {
        return Err(Error::InvalidArgument(format!(
            "time {t} is within one step of the horizon {horizon}"
        )));
    }
    let n = gen.space().total_states();
    let mut q = q0.probs().to_vec();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let rhs = |t: f64, v: &[f64], out: &mut [f64]| {
        gen.apply(v, out);
        let f = time_factor(horizon - t);
        out.iter_mut().for_each(|o| *o *= f);
    };
    let mut t_now = 0.0;
    let mut densities = Vec::with_capacity(times.len());
    for &t_out in times {
        let span = t_out - t_now;
        if span > 0.0 {
            let steps = (span / step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for j in 0..steps {
                let t0 = t_now + j as f64 * h;
                rhs(t0, &q, &mut k[0]);
                for i in 0..n {
                    tmp[i] = q[i] + 0.5 * h * k[0][i];
                }
                rhs(t0 + 0.5 * h, &tmp, &mut k[1]);
                for i in 0..n {
                    tmp[i] = q[i] + 0.5 * h * k[1][i];
                }
                rhs(t0 + 0.5 * h, &tmp, &mut k[2]);
                for i in 0..n {
                    tmp[i] = q[i] + h * k[2][i];
                }
                rhs(t0 + h, &tmp, &mut k[3]);
                for i in 0..n {
                    q[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
                if let Some(&v) = q.iter().find(|&&v| v < -NEGATIVITY_TOL) {
                    return Err(Error::StepTooCoarse { value: v, time: t0 + h });
                }
            }
            t_now = t_out;
        }
        densities.push(to_density(gen, q.clone())?);
    }
    Ok(OracleSolution {
        times: times.to_vec(),
        densities,
        method: OracleMethod::Ode,
        tolerance: step,
    })
}
