//! Dense probability vectors over the `N^D` grid, supports and divergences.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln0, logsumexp};
use crate::space::StateSpace;

/// Arithmetic noise below zero that is silently clamped.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed deviation of the total mass from one.
pub const SUM_TOL: f64 = 1e-10;
/// Default support threshold.
pub const DEFAULT_TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseDistribution {
    space: StateSpace,
    probs: Vec<f64>,
}

impl DenseDistribution {
    /// Validates length, nonnegativity (clamping tiny negatives) and unit mass.
    pub fn new(space: StateSpace, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.total_states() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} entries, got {}",
                space.total_states(),
                probs.len()
            )));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
            }
            if *p < 0.0 {
                if *p > -CLAMP_TOL {
                    log::debug!("clamping entry {i} = {p:e} to zero");
                    *p = 0.0;
                } else {
                    return Err(Error::InvalidDistribution(format!("entry {i} = {p:e} is negative")));
                }
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { space, probs })
    }

    /// Normalizes a nonnegative weight vector.
    pub fn from_weights(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(space, weights.into_iter().map(|w| w / total).collect())
    }

    /// Normalizes `exp(log_weights)` without overflow.
    pub fn from_log_weights(space: StateSpace, log_weights: &[f64]) -> Result<Self> {
        let lz = logsumexp(log_weights.iter().copied());
        if lz == f64::NEG_INFINITY {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        let probs = log_weights.iter().map(|&l| (l - lz).exp()).collect();
        Self::new(space, probs)
    }

    pub fn point_mass(space: StateSpace, idx: usize) -> Self {
        let mut probs = vec![0.0; space.total_states()];
        probs[idx] = 1.0;
        Self { space, probs }
    }

    /// Uniform over the fully unmasked states.
    pub fn uniform_unmasked(space: StateSpace) -> Self {
        let mut probs = vec![0.0; space.total_states()];
        let w = 1.0 / space.unmasked_states() as f64;
        for i in space.unmasked_iter() {
            probs[i] = w;
        }
        Self { space, probs }
    }

    /// Builds a distribution from values over the fully unmasked states,
    /// listed row-major over `{1..N-1}^D`. Mask-containing states get zero.
    pub fn from_unmasked(space: StateSpace, values: &[f64]) -> Result<Self> {
        if values.len() != space.unmasked_states() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} non-mask entries, got {}",
                space.unmasked_states(),
                values.len()
            )));
        }
        let mut probs = vec![0.0; space.total_states()];
        for (k, &v) in values.iter().enumerate() {
            probs[space.unmasked_index(k)] = v;
        }
        Self::new(space, probs)
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    pub fn at(&self, state: &[usize]) -> Result<f64> {
        Ok(self.probs[self.space.index_of(state)?])
    }

    /// Total mass on states containing at least one mask token.
    pub fn masked_mass(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.space.is_unmasked(*i))
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal of coordinate `d` (0-based), indexed by 0-based token.
    pub fn marginal(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.alphabet()];
        for (i, &p) in self.probs.iter().enumerate() {
            out[self.space.digit(i, d)] += p;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Support of a distribution together with its per-coordinate projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub space: StateSpace,
    /// Flat indices of members.
    pub members: BTreeSet<usize>,
    /// Per coordinate, the 1-based tokens appearing in `members`.
    pub marginal_supports: Vec<BTreeSet<usize>>,
}

impl SupportSet {
    pub fn from_members(space: StateSpace, members: BTreeSet<usize>) -> Self {
        let mut marginal_supports = vec![BTreeSet::new(); space.dims()];
        for &i in &members {
            for (d, set) in marginal_supports.iter_mut().enumerate() {
                set.insert(space.digit(i, d) + 1);
            }
        }
        Self {
            space,
            members,
            marginal_supports,
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.contains(&idx)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.is_subset(&other.members)
    }
}

/// States with probability above `tau`, and their marginal supports.
pub fn support_of(d: &DenseDistribution, tau: f64) -> SupportSet {
    let members = d
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > tau)
        .map(|(i, _)| i)
        .collect();
    SupportSet::from_members(d.space, members)
}

/// Rényi-type divergence `1/(alpha-1) * ln sum_x mu1^alpha / mu2^(alpha-1)`.
pub fn alpha_divergence(mu1: &DenseDistribution, mu2: &DenseDistribution, alpha: f64) -> Result<f64> {
    if mu1.space != mu2.space {
        return Err(Error::SpaceMismatch);
    }
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, inf) \\ {{1}}")));
    }
    let mut terms = Vec::with_capacity(mu1.probs.len());
    for (i, (&a, &b)) in mu1.probs.iter().zip(&mu2.probs).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::SupportViolation(i));
        }
        terms.push(alpha * a.ln() - (alpha - 1.0) * b.ln());
    }
    Ok(logsumexp(terms) / (alpha - 1.0))
}

/// Entrywise log of the probabilities, with `ln 0 = -inf`.
pub fn log_probs(d: &DenseDistribution) -> Vec<f64> {
    d.probs.iter().map(|&p| ln0(p)).collect()
}
