//! Test-side reference computations, written from the definitions and
//! sharing no code with the library beyond the state indexing.

#![allow(dead_code)]

use maskcfg::{DenseDistribution, MixtureModel, StateSpace};

/// `M(x) = sum` of `probs` over states agreeing with `x` on its unmasked
/// coordinates.
pub fn brute_marginal(space: StateSpace, probs: &[f64], x: usize) -> f64 {
    let dims = space.dims();
    let mask = space.alphabet() - 1;
    (0..space.total_states())
        .filter(|&y| (0..dims).all(|d| space.digit(x, d) == mask || space.digit(x, d) == space.digit(y, d)))
        .map(|y| probs[y])
        .sum()
}

/// Mixture `sum_k a_k p(.|z_k)` by direct summation.
pub fn brute_full(m: &MixtureModel) -> Vec<f64> {
    let mut out = vec![0.0; m.space().total_states()];
    for (a, c) in m.weights().iter().zip(m.conditionals()) {
        for (o, p) in out.iter_mut().zip(c.probs()) {
            *o += a * p;
        }
    }
    out
}

/// Tilt `p^-w p_z^(1+w)` normalized, by direct evaluation; `w = -1` is `p`.
pub fn brute_tilt(m: &MixtureModel, k: usize, w: f64) -> Vec<f64> {
    let p = brute_full(m);
    let pz = m.conditional(k).probs();
    let raw: Vec<f64> = p
        .iter()
        .zip(pz)
        .map(|(&a, &b)| {
            if w == -1.0 {
                a
            } else if b > 0.0 {
                a.powf(-w) * b.powf(1.0 + w)
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

/// Dense guided base matrix, row-major `(y, x)`, from brute-force marginals.
/// At `w = -1` the conditional drops out entirely.
pub fn brute_guided_base(m: &MixtureModel, k: usize, w: f64) -> Vec<f64> {
    let space = m.space();
    let n = space.total_states();
    let p = brute_full(m);
    let pz = m.conditional(k).probs().to_vec();
    let mp: Vec<f64> = (0..n).map(|x| brute_marginal(space, &p, x)).collect();
    let mz: Vec<f64> = if w == -1.0 {
        mp.clone()
    } else {
        (0..n).map(|x| brute_marginal(space, &pz, x)).collect()
    };
    let mut b = vec![0.0; n * n];
    for x in 0..n {
        if mz[x] == 0.0 {
            continue;
        }
        for d in 0..space.dims() {
            if !space.is_masked_at(x, d) {
                continue;
            }
            for tok in 0..space.alphabet() - 1 {
                let y = space.with_digit(x, d, tok);
                if mz[y] == 0.0 {
                    continue;
                }
                let v = if w == -1.0 {
                    mp[y] / mp[x]
                } else {
                    (mp[y] / mp[x]).powf(-w) * (mz[y] / mz[x]).powf(1.0 + w)
                };
                b[y * n + x] += v;
                b[x * n + x] -= v;
            }
        }
    }
    b
}

/// RK4 on `dq/ds = B q` over `[0, s]` with `steps` equal steps.
pub fn rk4_linear(b: &[f64], q0: &[f64], s: f64, steps: usize) -> Vec<f64> {
    let n = q0.len();
    let mv = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| b[i * n + j] * v[j]).sum()).collect() };
    let h = s / steps as f64;
    let mut q = q0.to_vec();
    for _ in 0..steps {
        let k1 = mv(&q);
        let t: Vec<f64> = (0..n).map(|i| q[i] + 0.5 * h * k1[i]).collect();
        let k2 = mv(&t);
        let t: Vec<f64> = (0..n).map(|i| q[i] + 0.5 * h * k2[i]).collect();
        let k3 = mv(&t);
        let t: Vec<f64> = (0..n).map(|i| q[i] + h * k3[i]).collect();
        let k4 = mv(&t);
        for i in 0..n {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    q
}

/// `r(t) = (1 - e^-(T-t)) / (1 - e^-T)`.
pub fn ratio(horizon: f64, t: f64) -> f64 {
    (1.0 - (-(horizon - t)).exp()) / (1.0 - (-horizon).exp())
}

/// Dense forward generator: every unmasked coordinate jumps to the mask at
/// rate one. Row-major `(to, from)`.
pub fn forward_generator(space: StateSpace) -> Vec<f64> {
    let n = space.total_states();
    let mask = space.alphabet() - 1;
    let mut g = vec![0.0; n * n];
    for x in 0..n {
        for d in 0..space.dims() {
            if space.digit(x, d) != mask {
                let y = space.with_digit(x, d, mask);
                g[y * n + x] += 1.0;
                g[x * n + x] -= 1.0;
            }
        }
    }
    g
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn all_mask(space: StateSpace) -> DenseDistribution {
    DenseDistribution::point_mass(space, space.all_mask_index())
}
