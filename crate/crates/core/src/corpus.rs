//! Seeded random mixtures and the built-in scenarios used by the tests,
//! the validation suite and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distribution::DenseDistribution;
use crate::error::Result;
use crate::mixture::MixtureModel;
use crate::space::StateSpace;

/// Cluster profile used by the figure scenarios.
pub const CLUSTER: [f64; 5] = [0.1, 0.2, 0.4, 0.2, 0.1];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize, keep: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.random::<f64>() < keep { 0.05 + rng.random::<f64>() } else { 0.0 })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        let k = rng.random_range(0..len);
        w[k] = 1.0;
    }
    w
}

/// Random distribution over the non-mask states; each state is kept with
/// probability `keep`.
pub fn random_distribution(seed: u64, space: StateSpace, keep: f64) -> Result<DenseDistribution> {
    let mut r = rng(seed);
    let w = random_weights(&mut r, space.unmasked_states(), keep);
    let total: f64 = w.iter().sum();
    let vals: Vec<f64> = w.iter().map(|v| v / total).collect();
    DenseDistribution::from_unmasked(space, &vals)
}

/// Random `classes`-component mixture with sparse conditionals.
pub fn random_mixture(seed: u64, dims: usize, alphabet: usize, classes: usize, keep: f64) -> Result<MixtureModel> {
    let space = StateSpace::new(dims, alphabet)?;
    let mut r = rng(seed);
    let mut weights: Vec<f64> = (0..classes).map(|_| 0.2 + r.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let fix: f64 = 1.0 - weights.iter().sum::<f64>();
    weights[0] += fix;
    let conditionals = (0..classes)
        .map(|k| random_distribution(seed.wrapping_mul(1_000_003).wrapping_add(k as u64 + 1), space, keep))
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..classes).map(|k| format!("z{}", k + 1)).collect();
    MixtureModel::new(space, labels, weights, conditionals)
}

/// Mixture from explicit class vectors over the non-mask states.
pub fn mixture_from_vectors(space: StateSpace, weights: &[f64], classes: &[Vec<f64>]) -> Result<MixtureModel> {
    let conditionals = classes
        .iter()
        .map(|v| {
            let total: f64 = v.iter().sum();
            let vals: Vec<f64> = v.iter().map(|x| x / total).collect();
            DenseDistribution::from_unmasked(space, &vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..classes.len()).map(|k| format!("z{}", k + 1)).collect();
    MixtureModel::new(space, labels, weights.to_vec(), conditionals)
}

/// Mixture whose first class has a unique maximizer of `p(x|z_1)/p(x)`.
///
/// Class 1 has full support with at least `0.1` on one state `x*`; the
/// other classes cover every state except `x*`. The first class weight is
/// drawn from `[0.1, 0.3]`, so the supremum ratio is `1/a_1`.
pub fn unique_maximizer_mixture(seed: u64, dims: usize, alphabet: usize) -> Result<MixtureModel> {
    let space = StateSpace::new(dims, alphabet)?;
    let mut r = rng(seed);
    let len = space.unmasked_states();
    let classes = 2 + r.random_range(0..2usize);
    let a1 = 0.1 + 0.2 * r.random::<f64>();
    let mut weights = vec![a1];
    let rest: Vec<f64> = (1..classes).map(|_| 0.2 + r.random::<f64>()).collect();
    let rest_total: f64 = rest.iter().sum();
    weights.extend(rest.iter().map(|v| (1.0 - a1) * v / rest_total));
    let star = r.random_range(0..len);
    let share = 0.1 + 0.4 * r.random::<f64>();
    let mut first = random_weights(&mut r, len, 1.0);
    first[star] = 0.0;
    let total: f64 = first.iter().sum();
    first.iter_mut().for_each(|v| *v *= (1.0 - share) / total);
    first[star] = share;
    let mut vectors = vec![first];
    for _ in 1..classes {
        let mut v = random_weights(&mut r, len, 1.0);
        v[star] = 0.0;
        vectors.push(v);
    }
    let fix = 1.0 - weights.iter().sum::<f64>();
    weights[0] += fix;
    mixture_from_vectors(space, &weights, &vectors)
}

fn cluster_1d(len: usize, start: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    for (k, &c) in CLUSTER.iter().enumerate() {
        v[start + k] = c;
    }
    v
}

/// Two five-token clusters on disjoint supports, equal class weights.
pub fn disjoint_1d() -> Result<MixtureModel> {
    let space = StateSpace::new(1, 11)?;
    mixture_from_vectors(space, &[0.5, 0.5], &[cluster_1d(10, 0), cluster_1d(10, 5)])
}

/// Two five-token clusters shifted by two so that three tokens overlap.
pub fn intersection_1d() -> Result<MixtureModel> {
    let space = StateSpace::new(1, 8)?;
    mixture_from_vectors(space, &[0.5, 0.5], &[cluster_1d(7, 0), cluster_1d(7, 2)])
}

fn diamond(side: usize, center: (usize, usize)) -> Vec<f64> {
    let mut v = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            let di = i as isize - center.0 as isize;
            let dj = j as isize - center.1 as isize;
            if di.abs() + dj.abs() <= 2 {
                v[i * side + j] = CLUSTER[(di + 2) as usize] * CLUSTER[(dj + 2) as usize];
            }
        }
    }
    v
}

/// Two diamond clusters on a 10x10 grid whose marginal supports are disjoint.
pub fn disjoint_2d() -> Result<MixtureModel> {
    let space = StateSpace::new(2, 11)?;
    mixture_from_vectors(space, &[0.5, 0.5], &[diamond(10, (2, 2)), diamond(10, (7, 7))])
}

/// Two diamond clusters two cells apart diagonally, so they share cells.
pub fn intersection_2d() -> Result<MixtureModel> {
    let space = StateSpace::new(2, 8)?;
    mixture_from_vectors(space, &[0.5, 0.5], &[diamond(7, (2, 2)), diamond(7, (4, 4))])
}

/// Class 1 uniform on `{1,2,3}^2`, class 2 uniform on `{2,3,4}^2`, `N = 5`.
pub fn block_overlap_2d() -> Result<MixtureModel> {
    let space = StateSpace::new(2, 5)?;
    let block = |lo: usize| {
        let mut v = vec![0.0; 16];
        for i in lo..lo + 3 {
            for j in lo..lo + 3 {
                v[i * 4 + j] = 1.0;
            }
        }
        v
    };
    mixture_from_vectors(space, &[0.5, 0.5], &[block(0), block(1)])
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = [
    "disjoint-1d",
    "intersection-1d",
    "disjoint-2d",
    "intersection-2d",
    "block-overlap-2d",
];

pub fn builtin(name: &str) -> Option<Result<MixtureModel>> {
    Some(match name {
        "disjoint-1d" => disjoint_1d(),
        "intersection-1d" => intersection_1d(),
        "disjoint-2d" => disjoint_2d(),
        "intersection-2d" => intersection_2d(),
        "block-overlap-2d" => block_overlap_2d(),
        _ => return None,
    })
}
