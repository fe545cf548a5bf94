//! Forward masking process `dmu/dt = Q mu`, each coordinate independently
//! jumping to the mask token at unit rate.

use serde::{Deserialize, Serialize};

use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::space::StateSpace;

/// Per-coordinate transition kernel `A_t` acting on a `D`-fold product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardKernel {
    pub space: StateSpace,
    pub t: f64,
}

impl ForwardKernel {
    pub fn new(space: StateSpace, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time t = {t} must be nonnegative")));
        }
        Ok(Self { space, t })
    }

    /// Entry `A_t(to, from)` of the 1D kernel in 1-based tokens.
    pub fn entry(&self, to: usize, from: usize) -> f64 {
        let n = self.space.alphabet();
        match (to == n, from == n) {
            (true, true) => 1.0,
            (false, true) => 0.0,
            (true, false) => -(-self.t).exp_m1(),
            (false, false) if to == from => (-self.t).exp(),
            _ => 0.0,
        }
    }

    /// Applies the kernel along coordinate `d` in place.
    pub fn apply_along(&self, probs: &mut [f64], d: usize) {
        let n = self.space.alphabet();
        let stride = self.space.stride(d);
        let keep = (-self.t).exp();
        let leak = -(-self.t).exp_m1();
        let block = stride * n;
        for start in (0..probs.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                let mut moved = 0.0;
                for k in 0..n - 1 {
                    let v = probs[base + k * stride];
                    moved += v;
                    probs[base + k * stride] = keep * v;
                }
                probs[base + (n - 1) * stride] += leak * moved;
            }
        }
    }

    pub fn apply(&self, mu: &DenseDistribution) -> Result<DenseDistribution> {
        if mu.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut probs = mu.probs().to_vec();
        for d in 0..self.space.dims() {
            self.apply_along(&mut probs, d);
        }
        DenseDistribution::new(self.space, probs)
    }
}

/// `mu_t = A_t^{⊗D} mu`, applied one coordinate at a time.
pub fn forward_density(mu: &DenseDistribution, t: f64) -> Result<DenseDistribution> {
    ForwardKernel::new(mu.space(), t)?.apply(mu)
}

/// Single entry of `mu_t` from the direct sum over states agreeing with `x`
/// on its unmasked coordinates.
pub fn forward_density_at(mu: &DenseDistribution, x: &[usize], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    let space = mu.space();
    let idx = space.index_of(x)?;
    let n = space.alphabet();
    let masked: Vec<usize> = (0..space.dims()).filter(|&d| space.is_masked_at(idx, d)).collect();
    let unmasked = space.dims() - masked.len();
    let leak = -(-t).exp_m1();
    let mut total = 0.0;
    let combos = n.pow(masked.len() as u32);
    for c in 0..combos {
        let mut y = idx;
        let mut weight = 1.0;
        let mut rem = c;
        for &d in &masked {
            let digit = rem % n;
            rem /= n;
            y = space.with_digit(y, d, digit);
            if digit < n - 1 {
                weight *= leak;
            }
        }
        total += weight * mu.prob(y);
    }
    Ok((-(unmasked as f64) * t).exp() * total)
}
