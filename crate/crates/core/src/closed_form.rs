//! Exact solutions of the reverse sampling dynamics in one and two
//! dimensions.
//!
//! In 2D everything is expressed through the unnormalized tilt
//! `g(i, j) = p(i, j)^-w p(i, j | z)^(1+w)`, its row and column analogues
//! `g1(i)`, `g2(j)` built from the marginals, and the row/column ratios
//! `c_i = sum_l g(i, l) / g1(i)`, `d_j = sum_l g(l, j) / g2(j)`.

use serde::{Deserialize, Serialize};

use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::mixture::{log_normalizer_z, tilted_distribution, GuidanceConfig, MixtureModel};
use crate::numerics::{ln0, log_tilt, logsumexp, TimeRatio};
use crate::rates::partial_marginals;
use crate::space::StateSpace;

/// Largest tolerated drift of the sampled distribution from unit mass.
pub const DRIFT_TOL: f64 = 1e-8;

fn require_dims(space: StateSpace, dims: usize) -> Result<()> {
    if space.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: space.dims(),
        });
    }
    Ok(())
}

/// 1D unguided solution `q_t = (1 - r) p + r δ_N`.
pub fn solve_1d_unguided(p: &DenseDistribution, horizon: f64, t: f64) -> Result<DenseDistribution> {
    require_dims(p.space(), 1)?;
    let tr = TimeRatio::new(horizon, t)?;
    let mut probs: Vec<f64> = p.probs().iter().map(|v| (1.0 - tr.r) * v).collect();
    let mask = p.space().alphabet() - 1;
    probs[mask] += tr.r;
    DenseDistribution::new(p.space(), probs)
}

/// 1D guided solution `q_t = (1 - r^Z) p^{z,w} + r^Z δ_N`.
pub fn solve_1d_guided(m: &MixtureModel, g: &GuidanceConfig, horizon: f64, t: f64) -> Result<DenseDistribution> {
    require_dims(m.space(), 1)?;
    let tr = TimeRatio::new(horizon, t)?;
    let z = log_normalizer_z(m, g)?.exp();
    let tilt = tilted_distribution(m, g)?;
    let r_z = tr.pow(z);
    let keep = if tr.ln_r == 0.0 { 0.0 } else { -(z * tr.ln_r).exp_m1() };
    let mut probs: Vec<f64> = tilt.probs().iter().map(|v| keep * v).collect();
    probs[m.space().alphabet() - 1] = r_z;
    DenseDistribution::new(m.space(), probs)
}

/// Two-dimensional coefficients, stored as logarithms.
///
/// Index `l` in `0..N-1` refers to token `l + 1`; index `N - 1` holds the
/// mask entries `c_N = Z / sum g1` and `d_N = Z / sum g2`. Rows or columns
/// outside the conditional support carry `ln c = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients2D {
    pub alphabet: usize,
    pub ln_c: Vec<f64>,
    pub ln_d: Vec<f64>,
    pub ln_z: f64,
    /// `ln(-lambda_NN) = ln(sum g1 + sum g2)`.
    pub ln_neg_lambda: f64,
    /// `ln g(i, j)` over the `(N-1)^2` unmasked cells, row-major.
    pub ln_g: Vec<f64>,
    pub ln_g1: Vec<f64>,
    pub ln_g2: Vec<f64>,
}

impl Coefficients2D {
    pub fn c(&self, l: usize) -> f64 {
        self.ln_c[l].exp()
    }

    pub fn d(&self, l: usize) -> f64 {
        self.ln_d[l].exp()
    }

    pub fn z(&self) -> f64 {
        self.ln_z.exp()
    }

    /// `lambda_NN = -Z (1/c_N + 1/d_N)`.
    pub fn lambda_nn(&self) -> f64 {
        -self.ln_neg_lambda.exp()
    }

    fn ln_g_at(&self, i: usize, j: usize) -> f64 {
        self.ln_g[i * (self.alphabet - 1) + j]
    }
}

/// Row/column coefficients of the guided 2D dynamics.
pub fn coefficients_2d(m: &MixtureModel, g: &GuidanceConfig) -> Result<Coefficients2D> {
    require_dims(m.space(), 2)?;
    let space = m.space();
    let n = space.alphabet();
    let k = n - 1;
    let ln_z = log_normalizer_z(m, g)?;
    let mp = partial_marginals(space, m.full().probs());
    let mz = partial_marginals(space, m.conditional(g.class_index).probs());
    let w = g.w;
    let cell = |i: usize, j: usize| i * n + j;
    let ln_g: Vec<f64> = (0..k * k)
        .map(|c| {
            let (i, j) = (c / k, c % k);
            let idx = cell(i, j);
            if mz[idx] == 0.0 && w > -1.0 {
                f64::NEG_INFINITY
            } else {
                log_tilt(ln0(mp[idx]), ln0(mz[idx]), w)
            }
        })
        .collect();
    let marginal = |idx: usize| {
        if mz[idx] == 0.0 && w > -1.0 {
            f64::NEG_INFINITY
        } else {
            log_tilt(ln0(mp[idx]), ln0(mz[idx]), w)
        }
    };
    let ln_g1: Vec<f64> = (0..k).map(|i| marginal(cell(i, k))).collect();
    let ln_g2: Vec<f64> = (0..k).map(|j| marginal(cell(k, j))).collect();
    let ratio = |sum: f64, base: f64| if base == f64::NEG_INFINITY { 0.0 } else { sum - base };
    let mut ln_c: Vec<f64> = (0..k)
        .map(|i| ratio(logsumexp((0..k).map(|l| ln_g[i * k + l])), ln_g1[i]))
        .collect();
    let mut ln_d: Vec<f64> = (0..k)
        .map(|j| ratio(logsumexp((0..k).map(|l| ln_g[l * k + j])), ln_g2[j]))
        .collect();
    let ln_sum_g1 = logsumexp(ln_g1.iter().copied());
    let ln_sum_g2 = logsumexp(ln_g2.iter().copied());
    ln_c.push(ln_z - ln_sum_g1);
    ln_d.push(ln_z - ln_sum_g2);
    Ok(Coefficients2D {
        alphabet: n,
        ln_c,
        ln_d,
        ln_z,
        ln_neg_lambda: logsumexp([ln_sum_g1, ln_sum_g2]),
        ln_g,
        ln_g1,
        ln_g2,
    })
}

/// Value of `alpha_t(x)` plus numerical flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaValue {
    pub value: f64,
    /// An eigenvalue collision was resolved by its analytic limit.
    pub collision: bool,
    /// A power `r^a` underflowed to zero.
    pub underflow: bool,
}

/// `-(f(a) - f(b)) / (a - b)` with `f(a) = (1 - r^a) / a`.
fn neg_dd_f(tr: &TimeRatio, a: f64, b: f64) -> (f64, bool, bool) {
    let (_, uf) = tr.pow_flagged(a);
    let (ddg, col) = tr.pow_divided_difference(a, b);
    let one_minus = if tr.ln_r == 0.0 { 0.0 } else { -(a * tr.ln_r).exp_m1() };
    (one_minus / a / b + ddg / b, col, uf)
}

/// `alpha_t(x)` for `x` in 1-based coordinates.
///
/// Both unmasked: `beta_ij`; one coordinate masked: `beta_{i,N}` or
/// `beta_{N,j}`; both masked: `r^{-lambda_NN}`.
pub fn alpha_coefficient(coef: &Coefficients2D, x: &[usize], tr: &TimeRatio) -> Result<AlphaValue> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: x.len(),
        });
    }
    let n = coef.alphabet;
    if x.iter().any(|&v| v == 0 || v > n) {
        return Err(Error::InvalidArgument(format!("state {x:?} outside 1..={n}")));
    }
    let neg_lambda = coef.ln_neg_lambda.exp();
    let (i, j) = (x[0] - 1, x[1] - 1);
    let masked = (i == n - 1, j == n - 1);
    Ok(match masked {
        (true, true) => {
            let (value, underflow) = tr.pow_flagged(neg_lambda);
            AlphaValue {
                value,
                collision: false,
                underflow,
            }
        }
        (false, true) | (true, false) => {
            let c = if masked.1 { coef.c(i) } else { coef.d(j) };
            let (dd, collision) = tr.pow_divided_difference(c, neg_lambda);
            let (_, underflow) = tr.pow_flagged(c);
            AlphaValue {
                value: -dd / c,
                collision,
                underflow,
            }
        }
        (false, false) => {
            if tr.r == 0.0 {
                let inv = (-coef.ln_c[i]).exp() + (-coef.ln_d[j]).exp();
                return Ok(AlphaValue {
                    value: inv / neg_lambda,
                    collision: false,
                    underflow: false,
                });
            }
            let (a, ca, ua) = neg_dd_f(tr, coef.c(i), neg_lambda);
            let (b, cb, ub) = neg_dd_f(tr, coef.d(j), neg_lambda);
            AlphaValue {
                value: a + b,
                collision: ca || cb,
                underflow: ua || ub,
            }
        }
    })
}

/// Flags collected while assembling a 2D solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    pub collisions: usize,
    pub underflows: usize,
}

/// Unnormalized `ln q_T` over all states from the coefficients.
fn log_sampled_from(coef: &Coefficients2D, space: StateSpace) -> Vec<f64> {
    let n = space.alphabet();
    let k = n - 1;
    let mut out = vec![f64::NEG_INFINITY; space.total_states()];
    for i in 0..k {
        for j in 0..k {
            let lg = coef.ln_g_at(i, j);
            if lg == f64::NEG_INFINITY {
                continue;
            }
            out[i * n + j] = logsumexp([-coef.ln_c[i], -coef.ln_d[j]]) + lg - coef.ln_neg_lambda;
        }
    }
    out
}

/// 2D solution at time `t` from precomputed coefficients.
pub fn solve_2d_with(coef: &Coefficients2D, space: StateSpace, tr: &TimeRatio) -> Result<(DenseDistribution, SolveFlags)> {
    require_dims(space, 2)?;
    let n = space.alphabet();
    if coef.alphabet != n {
        return Err(Error::SpaceMismatch);
    }
    let k = n - 1;
    let mut flags = SolveFlags::default();
    let mut probs = vec![0.0; space.total_states()];
    if tr.r == 0.0 {
        for (p, l) in probs.iter_mut().zip(log_sampled_from(coef, space)) {
            *p = l.exp();
        }
        return Ok((DenseDistribution::new(space, probs)?, flags));
    }
    let mut note = |a: &AlphaValue| {
        flags.collisions += a.collision as usize;
        flags.underflows += a.underflow as usize;
    };
    for i in 0..n {
        for j in 0..n {
            let a = alpha_coefficient(coef, &[i + 1, j + 1], tr)?;
            note(&a);
            let ln_weight = match (i == k, j == k) {
                (true, true) => 0.0,
                (false, true) => coef.ln_c[i] + coef.ln_g1[i],
                (true, false) => coef.ln_d[j] + coef.ln_g2[j],
                (false, false) => coef.ln_g_at(i, j),
            };
            probs[i * n + j] = if a.value > 0.0 && ln_weight > f64::NEG_INFINITY {
                (a.value.ln() + ln_weight).exp()
            } else {
                0.0
            };
        }
    }
    Ok((DenseDistribution::new(space, probs)?, flags))
}

/// Guided 2D density at time `t`.
pub fn solve_2d_guided(m: &MixtureModel, g: &GuidanceConfig, horizon: f64, t: f64) -> Result<DenseDistribution> {
    let coef = coefficients_2d(m, g)?;
    let tr = TimeRatio::new(horizon, t)?;
    Ok(solve_2d_with(&coef, m.space(), &tr)?.0)
}

/// Terminal law from coefficients; fails on normalization drift.
pub fn sampled_from_coefficients(coef: &Coefficients2D, space: StateSpace) -> Result<DenseDistribution> {
    require_dims(space, 2)?;
    let log_q = log_sampled_from(coef, space);
    let total = logsumexp(log_q.iter().copied()).exp();
    if !((total - 1.0).abs() <= DRIFT_TOL) {
        return Err(Error::NormalizationDrift(total - 1.0));
    }
    let probs = log_q.iter().map(|l| l.exp() / total).collect();
    DenseDistribution::new(space, probs)
}

/// Terminal law of the guided 2D dynamics: the tilt reweighted by
/// `(1/c_i + 1/d_j) / (1/c_N + 1/d_N)`.
pub fn sampled_distribution_2d(m: &MixtureModel, g: &GuidanceConfig) -> Result<DenseDistribution> {
    let coef = coefficients_2d(m, g)?;
    sampled_from_coefficients(&coef, m.space())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mix_1d() -> MixtureModel {
        let s = StateSpace::new(1, 4).unwrap();
        let a = DenseDistribution::from_unmasked(s, &[0.5, 0.5, 0.0]).unwrap();
        let b = DenseDistribution::from_unmasked(s, &[0.0, 0.5, 0.5]).unwrap();
        MixtureModel::new(s, vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![a, b]).unwrap()
    }

    fn mix_2d() -> MixtureModel {
        let s = StateSpace::new(2, 3).unwrap();
        let a = DenseDistribution::from_unmasked(s, &[0.4, 0.3, 0.2, 0.1]).unwrap();
        let b = DenseDistribution::from_unmasked(s, &[0.1, 0.1, 0.1, 0.7]).unwrap();
        MixtureModel::new(s, vec!["a".into(), "b".into()], vec![0.3, 0.7], vec![a, b]).unwrap()
    }

    #[test]
    fn unguided_endpoints() {
        let s = StateSpace::new(1, 4).unwrap();
        let p = DenseDistribution::from_unmasked(s, &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(solve_1d_unguided(&p, 2.0, 0.0).unwrap(), DenseDistribution::point_mass(s, 3));
        assert_eq!(solve_1d_unguided(&p, 2.0, 2.0).unwrap(), p);
        assert!(solve_1d_unguided(&DenseDistribution::uniform_unmasked(StateSpace::new(2, 3).unwrap()), 1.0, 0.5).is_err());
    }

    #[test]
    fn guided_terminal_is_tilt() {
        let m = mix_1d();
        let g = GuidanceConfig::new(0, 1.0).unwrap();
        let q = solve_1d_guided(&m, &g, 1.0, 1.0).unwrap();
        assert_relative_eq!(q.prob(0), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(q.prob(1), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(q.prob(3), 0.0);
    }

    #[test]
    fn coefficients_for_self_guidance_are_one() {
        let s = StateSpace::new(2, 4).unwrap();
        let p = DenseDistribution::from_weights(s, (0..16).map(|k| if k % 4 == 3 || k >= 12 { 0.0 } else { 1.0 + k as f64 }).collect()).unwrap();
        let m = MixtureModel::new(s, vec!["self".into()], vec![1.0], vec![p.clone()]).unwrap();
        let g = GuidanceConfig::new(0, 2.5).unwrap();
        let coef = coefficients_2d(&m, &g).unwrap();
        for l in 0..4 {
            assert!(coef.ln_c[l].abs() < 1e-14);
            assert!(coef.ln_d[l].abs() < 1e-14);
        }
        assert_relative_eq!(coef.lambda_nn(), -2.0 * coef.z(), max_relative = 1e-14);
        let q = sampled_distribution_2d(&m, &g).unwrap();
        assert!(q.max_abs_diff(&p).unwrap() < 1e-14);
    }

    #[test]
    fn two_dimensional_endpoints() {
        let m = mix_2d();
        let g = GuidanceConfig::new(0, 1.5).unwrap();
        let q0 = solve_2d_guided(&m, &g, 1.0, 0.0).unwrap();
        assert_eq!(q0.prob(8), 1.0);
        let qt = solve_2d_guided(&m, &g, 1.0, 1.0).unwrap();
        let qs = sampled_distribution_2d(&m, &g).unwrap();
        assert!(qt.max_abs_diff(&qs).unwrap() < 1e-15);
        let mid = solve_2d_guided(&m, &g, 1.0, 0.5).unwrap();
        assert_relative_eq!(mid.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn drift_is_reported() {
        let m = mix_2d();
        let g = GuidanceConfig::new(0, 1.0).unwrap();
        let mut coef = coefficients_2d(&m, &g).unwrap();
        coef.ln_c[0] += 0.1;
        assert!(matches!(sampled_from_coefficients(&coef, m.space()), Err(Error::NormalizationDrift(_))));
    }
}
