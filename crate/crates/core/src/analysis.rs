//! Total-variation curves and decay fits, support-based case analysis of
//! the sampled distributions, and local moments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::closed_form::coefficients_2d;
use crate::distribution::{support_of, DenseDistribution, SupportSet, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::mixture::{log_normalizer_z, GuidanceConfig, MixtureModel};
use crate::numerics::{ln0, logsumexp, TimeRatio};
use crate::space::StateSpace;

/// Values below this are reported as exactly zero by the case formulas.
pub const CASE_FLOOR: f64 = 1e-300;
/// A marginal ratio this close to one counts as private in the limit.
pub const PRIVATE_TOL: f64 = 1e-12;

/// Half the L1 distance.
pub fn tv(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(0.5 * p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TV along the reverse dynamics at fixed guidance strength, with a
/// parallel log representation that survives underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVCurve {
    pub w: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
}

impl TVCurve {
    /// Log TV at `t0`, matched to a grid point within `1e-12`.
    pub fn log_at(&self, t0: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|&t| (t - t0).abs() <= 1e-12)
            .map(|k| self.log_values[k])
    }
}

fn require_dims(space: StateSpace, dims: usize) -> Result<()> {
    if space.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: space.dims(),
        });
    }
    Ok(())
}

/// 1D curve `TV(q_t, p^{z,w}) = r(t)^Z`.
pub fn tv_curve_1d_closed(m: &MixtureModel, g: &GuidanceConfig, horizon: f64, times: &[f64]) -> Result<TVCurve> {
    require_dims(m.space(), 1)?;
    let z = log_normalizer_z(m, g)?.exp();
    let mut values = Vec::with_capacity(times.len());
    let mut log_values = Vec::with_capacity(times.len());
    for &t in times {
        let tr = TimeRatio::new(horizon, t)?;
        values.push(tr.pow(z));
        log_values.push(if tr.ln_r == 0.0 { 0.0 } else { z * tr.ln_r });
    }
    Ok(TVCurve {
        w: g.w,
        horizon,
        times: times.to_vec(),
        values,
        log_values,
    })
}

/// Log of the mass on mask-containing states of the 2D solution at `tr`.
///
/// Unmasked states only gain mass along the reverse dynamics, so this mass
/// equals `TV(q_t, q_T)`.
pub fn log_masked_mass_2d(coef: &crate::closed_form::Coefficients2D, tr: &TimeRatio) -> f64 {
    if tr.r == 0.0 {
        return f64::NEG_INFINITY;
    }
    if tr.ln_r == 0.0 {
        return 0.0;
    }
    let k = coef.alphabet - 1;
    let neg_lambda = coef.ln_neg_lambda.exp();
    let mut terms = Vec::with_capacity(2 * k + 1);
    terms.push(neg_lambda * tr.ln_r);
    for i in 0..k {
        if coef.ln_g1[i] > f64::NEG_INFINITY {
            terms.push(coef.ln_g1[i] + tr.ln_abs_pow_divided_difference(coef.c(i), neg_lambda));
        }
        if coef.ln_g2[i] > f64::NEG_INFINITY {
            terms.push(coef.ln_g2[i] + tr.ln_abs_pow_divided_difference(coef.d(i), neg_lambda));
        }
    }
    logsumexp(terms)
}

/// 2D curve `TV(q_t, q_T)` from the exact densities.
pub fn tv_curve_2d(m: &MixtureModel, g: &GuidanceConfig, horizon: f64, times: &[f64]) -> Result<TVCurve> {
    require_dims(m.space(), 2)?;
    let coef = coefficients_2d(m, g)?;
    let mut values = Vec::with_capacity(times.len());
    let mut log_values = Vec::with_capacity(times.len());
    for &t in times {
        let tr = TimeRatio::new(horizon, t)?;
        let l = log_masked_mass_2d(&coef, &tr).min(0.0);
        log_values.push(l);
        values.push(l.exp());
    }
    Ok(TVCurve {
        w: g.w,
        horizon,
        times: times.to_vec(),
        values,
        log_values,
    })
}

/// Least-squares line through `(w, ln(-ln TV(t0)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// Guidance strengths that entered the fit.
    pub ws: Vec<f64>,
}

pub fn decay_exponent_fit(curves: &[TVCurve], t0: f64) -> Result<DecayFit> {
    if let Some(c) = curves.iter().find(|c| c.horizon != curves[0].horizon) {
        return Err(Error::InvalidArgument(format!(
            "curves disagree on the horizon ({} vs {})",
            c.horizon, curves[0].horizon
        )));
    }
    for pair in curves.windows(2) {
        if !(pair[1].w > pair[0].w) {
            return Err(Error::InvalidArgument("guidance strengths must increase".into()));
        }
    }
    if let Some(c) = curves.iter().find(|c| c.w < 2.0) {
        return Err(Error::InvalidArgument(format!("w = {} below the asymptotic range w >= 2", c.w)));
    }
    let mut pts = Vec::with_capacity(curves.len());
    for c in curves {
        let l = c
            .log_at(t0)
            .ok_or_else(|| Error::InvalidArgument(format!("curve at w = {} has no point at t0 = {t0}", c.w)))?;
        if l == f64::NEG_INFINITY || l >= 0.0 {
            log::warn!("excluding w = {} from the decay fit: TV(t0) is {}", c.w, l.exp());
            continue;
        }
        pts.push((c.w, (-l).ln()));
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateInput(format!("only {} usable TV values at t0 = {t0}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        slope,
        intercept,
        max_residual,
        ws: pts.iter().map(|p| p.0).collect(),
    })
}

/// Support sets of the guided class against the other classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSets {
    /// Support `X_1` of the guided class.
    pub support: SupportSet,
    /// `S_1`: states of `X_1` shared with some other class.
    pub shared: BTreeSet<usize>,
    /// Classes (by index in the relabeled mixture) whose support meets `X_1`,
    /// including the guided class itself.
    pub overlapping_classes: Vec<usize>,
}

fn overlap_sets(m: &MixtureModel, tau: f64) -> OverlapSets {
    let supports: Vec<SupportSet> = m.conditionals().iter().map(|c| support_of(c, tau)).collect();
    let x1 = supports[0].clone();
    let shared = x1
        .members
        .iter()
        .copied()
        .filter(|x| supports[1..].iter().any(|s| s.contains(*x)))
        .collect();
    let overlapping_classes = (0..m.num_classes())
        .filter(|&k| supports[k].members.intersection(&x1.members).next().is_some())
        .collect();
    OverlapSets {
        support: x1,
        shared,
        overlapping_classes,
    }
}

/// Terminal 1D law assembled from the support case analysis.
///
/// Disjoint supports give the guided conditional; otherwise states private
/// to the guided class keep weight `p(x|z_1)` and shared states get
/// `(a_1 p(x|z_1) / sum_{k in I_1} a_k p(x|z_k))^w p(x|z_1)`.
pub fn sampled_distribution_1d_cases(m: &MixtureModel, g: &GuidanceConfig) -> Result<DenseDistribution> {
    require_dims(m.space(), 1)?;
    if !(g.w >= 0.0) {
        return Err(Error::InvalidArgument(format!("case analysis needs w >= 0, got {}", g.w)));
    }
    let m = m.with_class_first(g.class_index);
    let sets = overlap_sets(&m, DEFAULT_TAU);
    if sets.shared.is_empty() {
        return Ok(m.conditional(0).clone());
    }
    let a1 = m.weights()[0];
    let space = m.space();
    let mut logw = vec![f64::NEG_INFINITY; space.total_states()];
    for &x in &sets.support.members {
        let pz = m.conditional(0).prob(x);
        logw[x] = if sets.shared.contains(&x) {
            let denom: f64 = sets
                .overlapping_classes
                .iter()
                .map(|&k| m.weights()[k] * m.conditional(k).prob(x))
                .sum();
            g.w * ((a1 * pz).ln() - denom.ln()) + pz.ln()
        } else {
            pz.ln()
        };
    }
    let lz = logsumexp(logw.iter().copied());
    let probs: Vec<f64> = logw
        .iter()
        .map(|&l| {
            let v = (l - lz).exp();
            if v < CASE_FLOOR {
                0.0
            } else {
                v
            }
        })
        .collect();
    DenseDistribution::from_weights(space, probs)
}

/// Support-based region of a state of the guided class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Both marginals private.
    R1,
    /// First marginal shared, second private.
    R21,
    /// Second marginal shared, first private.
    R22,
    /// Both marginals shared, the state itself private.
    R3,
    /// The state itself is shared.
    R4,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::R1, Region::R21, Region::R22, Region::R3, Region::R4];

    pub fn name(self) -> &'static str {
        match self {
            Region::R1 => "R1",
            Region::R21 => "R2_1",
            Region::R22 => "R2_2",
            Region::R3 => "R3",
            Region::R4 => "R4",
        }
    }
}

/// A member state of the guided class with its privacy ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionState {
    pub index: usize,
    pub coords: Vec<usize>,
    pub region: Region,
    /// `a_1 p_i(x_i|z_1) / sum_{k in I_{1,i}} a_k p_i(x_i|z_k)` for `i = 1, 2`.
    pub marginal_ratios: [f64; 2],
    /// `a_1 p(x|z_1) / sum_{k in I_1} a_k p(x|z_k)`.
    pub joint_ratio: f64,
}

impl RegionState {
    /// The four region weight formulas evaluated with this state's ratios,
    /// in order `A_1, A_{2,i}, A_3, A_4`; `i` is the shared coordinate for
    /// R2 states and otherwise the one giving the smaller `A_{2,i}`.
    pub fn weight_chain(&self, w: f64) -> [f64; 4] {
        let r1 = pow_ratio(self.marginal_ratios[0], w);
        let r2 = pow_ratio(self.marginal_ratios[1], w);
        let rj = pow_ratio(self.joint_ratio, w);
        let a2 = match self.region {
            Region::R21 => 1.0 + r1,
            Region::R22 => 1.0 + r2,
            _ => 1.0 + r1.min(r2),
        };
        [2.0, a2, r1 + r2, (r1 + r2) * rj]
    }

    /// Weight `A^{z_1,w}` of this state's region.
    pub fn weight(&self, w: f64) -> f64 {
        let chain = self.weight_chain(w);
        match self.region {
            Region::R1 => chain[0],
            Region::R21 | Region::R22 => chain[1],
            Region::R3 => chain[2],
            Region::R4 => chain[3],
        }
    }

    /// `lim_{w -> inf}` of [`RegionState::weight`].
    pub fn limit_weight(&self) -> f64 {
        let private = |r: f64| if r >= 1.0 - PRIVATE_TOL { 1.0 } else { 0.0 };
        match self.region {
            Region::R1 => 2.0,
            Region::R21 => 1.0 + private(self.marginal_ratios[0]),
            Region::R22 => 1.0 + private(self.marginal_ratios[1]),
            Region::R3 => private(self.marginal_ratios[0]) + private(self.marginal_ratios[1]),
            Region::R4 => 0.0,
        }
    }
}

fn pow_ratio(r: f64, w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        r.powf(w)
    }
}

/// Partition of the guided class's support by how private each state and
/// its marginals are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub space: StateSpace,
    pub guided_label: String,
    pub states: Vec<RegionState>,
    /// Marginal supports `X_{1,d}` (1-based tokens).
    pub marginal_supports: [BTreeSet<usize>; 2],
    /// Shared marginal tokens `S_{1,d}`.
    pub shared_marginals: [BTreeSet<usize>; 2],
}

impl RegionDecomposition {
    pub fn members(&self, region: Region) -> BTreeSet<usize> {
        self.states.iter().filter(|s| s.region == region).map(|s| s.index).collect()
    }

    /// Member coordinates of a region, in index order.
    pub fn member_coords(&self, region: Region) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .filter(|s| s.region == region)
            .map(|s| s.coords.clone())
            .collect()
    }

    /// Per-state weights `(index, A^{z_1,w}(x))`.
    pub fn weights(&self, w: f64) -> Vec<(usize, f64)> {
        self.states.iter().map(|s| (s.index, s.weight(w))).collect()
    }

    pub fn limit_weights(&self) -> Vec<(usize, f64)> {
        self.states.iter().map(|s| (s.index, s.limit_weight())).collect()
    }

    /// True when `A_1 >= A_{2,i} >= A_3 >= A_4` at every member state.
    pub fn ordering_holds(&self, w: f64) -> bool {
        self.states.iter().all(|s| {
            let a = s.weight_chain(w);
            a[0] >= a[1] && a[1] >= a[2] && a[2] >= a[3]
        })
    }
}

fn marginal_of(d: &DenseDistribution, coord: usize) -> Vec<f64> {
    d.marginal(coord)
}

/// Region decomposition of the class labelled `guided_label`.
pub fn region_decomposition_2d(m: &MixtureModel, guided_label: &str) -> Result<RegionDecomposition> {
    require_dims(m.space(), 2)?;
    let k1 = m.class_index(guided_label)?;
    let m = m.with_class_first(k1);
    let space = m.space();
    let sets = overlap_sets(&m, DEFAULT_TAU);
    if sets.support.members.is_empty() {
        return Err(Error::EmptyClassSupport);
    }
    let supports: Vec<SupportSet> = m.conditionals().iter().map(|c| support_of(c, DEFAULT_TAU)).collect();
    let mut shared_marginals = [BTreeSet::new(), BTreeSet::new()];
    let mut overlapping_marginal: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for d in 0..2 {
        let x1d = &supports[0].marginal_supports[d];
        for (k, s) in supports.iter().enumerate() {
            let meets = s.marginal_supports[d].intersection(x1d).next().is_some();
            if meets {
                overlapping_marginal[d].push(k);
            }
            if k > 0 {
                shared_marginals[d].extend(s.marginal_supports[d].intersection(x1d).copied());
            }
        }
    }
    let marginals: Vec<[Vec<f64>; 2]> = m
        .conditionals()
        .iter()
        .map(|c| [marginal_of(c, 0), marginal_of(c, 1)])
        .collect();
    let a = m.weights();
    let mut states = Vec::with_capacity(sets.support.members.len());
    for &x in &sets.support.members {
        let coords = space.state_of(x);
        let mut marginal_ratios = [1.0; 2];
        for d in 0..2 {
            let tok = coords[d] - 1;
            let num = a[0] * marginals[0][d][tok];
            let den: f64 = overlapping_marginal[d].iter().map(|&k| a[k] * marginals[k][d][tok]).sum();
            marginal_ratios[d] = num / den;
        }
        let num = a[0] * m.conditional(0).prob(x);
        let den: f64 = sets
            .overlapping_classes
            .iter()
            .map(|&k| a[k] * m.conditional(k).prob(x))
            .sum();
        let joint_ratio = num / den;
        let sh = [
            shared_marginals[0].contains(&coords[0]),
            shared_marginals[1].contains(&coords[1]),
        ];
        let region = if sets.shared.contains(&x) {
            Region::R4
        } else {
            match sh {
                [false, false] => Region::R1,
                [true, false] => Region::R21,
                [false, true] => Region::R22,
                [true, true] => Region::R3,
            }
        };
        states.push(RegionState {
            index: x,
            coords,
            region,
            marginal_ratios,
            joint_ratio,
        });
    }
    Ok(RegionDecomposition {
        space,
        guided_label: guided_label.to_string(),
        states,
        marginal_supports: [
            supports[0].marginal_supports[0].clone(),
            supports[0].marginal_supports[1].clone(),
        ],
        shared_marginals,
    })
}

/// Large-guidance limit `q^{z_1,inf} ∝ A^{z_1,inf}(x) p(x|z_1)`.
pub fn limit_distribution_2d(rd: &RegionDecomposition, m: &MixtureModel) -> Result<DenseDistribution> {
    if rd.space != m.space() {
        return Err(Error::SpaceMismatch);
    }
    let k1 = m.class_index(&rd.guided_label)?;
    let cond = m.conditional(k1);
    let mut weights = vec![0.0; rd.space.total_states()];
    for s in &rd.states {
        weights[s.index] = s.limit_weight() * cond.prob(s.index);
    }
    if weights.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateLimit);
    }
    DenseDistribution::from_weights(rd.space, weights)
}

/// Local mean and covariance of `d` restricted to `set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMoments {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

pub fn local_moments(d: &DenseDistribution, set: &BTreeSet<usize>) -> Result<LocalMoments> {
    let space = d.space();
    let mass: f64 = set.iter().map(|&x| d.prob(x)).sum();
    if !(mass > 0.0) {
        return Err(Error::EmptyRestriction);
    }
    let dims = space.dims();
    let mut mean = vec![0.0; dims];
    for &x in set {
        let w = d.prob(x) / mass;
        for (m, c) in mean.iter_mut().zip(space.state_of(x)) {
            *m += w * c as f64;
        }
    }
    let mut covariance = vec![vec![0.0; dims]; dims];
    for &x in set {
        let w = d.prob(x) / mass;
        let c: Vec<f64> = space.state_of(x).iter().zip(&mean).map(|(&v, m)| v as f64 - m).collect();
        for i in 0..dims {
            for j in 0..dims {
                covariance[i][j] += w * c[i] * c[j];
            }
        }
    }
    Ok(LocalMoments { mean, covariance })
}

/// Restriction of `d` to `set`, renormalized.
pub fn restrict(d: &DenseDistribution, set: &BTreeSet<usize>) -> Result<DenseDistribution> {
    let mut probs = vec![0.0; d.space().total_states()];
    for &x in set {
        probs[x] = d.prob(x);
    }
    if probs.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyRestriction);
    }
    DenseDistribution::from_weights(d.space(), probs)
}

/// States of the guided class not shared with any other class, `X_1 \ S_1`.
pub fn private_states(m: &MixtureModel, class_index: usize) -> BTreeSet<usize> {
    let m = m.with_class_first(class_index);
    let sets = overlap_sets(&m, DEFAULT_TAU);
    sets.support.members.difference(&sets.shared).copied().collect()
}

/// States of the guided class shared with another class, `S_1`.
pub fn shared_states(m: &MixtureModel, class_index: usize) -> BTreeSet<usize> {
    overlap_sets(&m.with_class_first(class_index), DEFAULT_TAU).shared
}

/// `ln sup_x p(x|z) / p(x)` over the conditional support.
pub fn log_sup_ratio(m: &MixtureModel, class_index: usize) -> f64 {
    let c = m.conditional(class_index);
    c.probs()
        .iter()
        .zip(m.full().probs())
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, p)| ln0(*q) - ln0(*p))
        .fold(f64::NEG_INFINITY, f64::max)
}
