//! Class-conditional mixtures, guidance settings and the tilted target.

use serde::{Deserialize, Serialize};

use crate::distribution::{log_probs, support_of, DenseDistribution, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::numerics::{log_tilt, logsumexp};
use crate::space::StateSpace;

/// Tolerance on the mixture weights summing to one.
pub const WEIGHT_TOL: f64 = 1e-12;

/// One class of a mixture document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    pub weight: f64,
    /// Row-major over the `(N-1)^D` non-mask states.
    pub probs: Vec<f64>,
}

/// JSON form of a mixture: `{"N": .., "D": .., "classes": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    #[serde(rename = "N")]
    pub alphabet: usize,
    #[serde(rename = "D")]
    pub dims: usize,
    pub classes: Vec<ClassSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    space: StateSpace,
    labels: Vec<String>,
    weights: Vec<f64>,
    conditionals: Vec<DenseDistribution>,
    full: DenseDistribution,
}

impl MixtureModel {
    pub fn new(
        space: StateSpace,
        labels: Vec<String>,
        weights: Vec<f64>,
        conditionals: Vec<DenseDistribution>,
    ) -> Result<Self> {
        if conditionals.is_empty() {
            return Err(Error::InvalidMixture("at least one class is required".into()));
        }
        if labels.len() != conditionals.len() || weights.len() != conditionals.len() {
            return Err(Error::InvalidMixture(format!(
                "{} labels, {} weights and {} conditionals",
                labels.len(),
                weights.len(),
                conditionals.len()
            )));
        }
        for (k, label) in labels.iter().enumerate() {
            if labels[..k].contains(label) {
                return Err(Error::InvalidMixture(format!("duplicate label {label:?}")));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMixture(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        for (label, c) in labels.iter().zip(&conditionals) {
            if c.space() != space {
                return Err(Error::SpaceMismatch);
            }
            if let Some(i) = (0..space.total_states()).find(|&i| !space.is_unmasked(i) && c.prob(i) != 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "class {label:?} puts mass on mask-containing state {:?}",
                    space.state_of(i)
                )));
            }
        }
        let mut probs = vec![0.0; space.total_states()];
        for (a, c) in weights.iter().zip(&conditionals) {
            for (acc, &p) in probs.iter_mut().zip(c.probs()) {
                *acc += a * p;
            }
        }
        let full = DenseDistribution::new(space, probs)?;
        let full_support = support_of(&full, 0.0);
        for c in &conditionals {
            assert!(support_of(c, 0.0).is_subset(&full_support));
        }
        Ok(Self {
            space,
            labels,
            weights,
            conditionals,
            full,
        })
    }

    pub fn from_spec(spec: &MixtureSpec) -> Result<Self> {
        let space = StateSpace::new(spec.dims, spec.alphabet)?;
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        let mut conditionals = Vec::new();
        for class in &spec.classes {
            labels.push(class.label.clone());
            weights.push(class.weight);
            conditionals.push(DenseDistribution::from_unmasked(space, &class.probs).map_err(|e| {
                Error::InvalidMixture(format!("class {:?}: {e}", class.label))
            })?);
        }
        Self::new(space, labels, weights, conditionals)
    }

    pub fn to_spec(&self) -> MixtureSpec {
        let classes = self
            .labels
            .iter()
            .zip(&self.weights)
            .zip(&self.conditionals)
            .map(|((label, &weight), c)| ClassSpec {
                label: label.clone(),
                weight,
                probs: self.space.unmasked_iter().map(|i| c.prob(i)).collect(),
            })
            .collect();
        MixtureSpec {
            alphabet: self.space.alphabet(),
            dims: self.space.dims(),
            classes,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MixtureSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_spec())?)
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn num_classes(&self) -> usize {
        self.conditionals.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn conditional(&self, k: usize) -> &DenseDistribution {
        &self.conditionals[k]
    }

    pub fn conditionals(&self) -> &[DenseDistribution] {
        &self.conditionals
    }

    /// The full distribution `p = sum_k a_k p(.|z_k)`.
    pub fn full(&self) -> &DenseDistribution {
        &self.full
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class label {label:?}")))
    }

    /// The same mixture with class `k` moved to the front.
    pub fn with_class_first(&self, k: usize) -> Self {
        let mut order: Vec<usize> = vec![k];
        order.extend((0..self.num_classes()).filter(|&j| j != k));
        Self {
            space: self.space,
            labels: order.iter().map(|&j| self.labels[j].clone()).collect(),
            weights: order.iter().map(|&j| self.weights[j]).collect(),
            conditionals: order.iter().map(|&j| self.conditionals[j].clone()).collect(),
            full: self.full.clone(),
        }
    }
}

/// Which class to guide toward and how strongly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub class_index: usize,
    pub w: f64,
}

impl GuidanceConfig {
    pub fn new(class_index: usize, w: f64) -> Result<Self> {
        if !(w >= -1.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("guidance strength w = {w} must be >= -1")));
        }
        Ok(Self { class_index, w })
    }

    fn check(&self, m: &MixtureModel) -> Result<()> {
        if self.class_index >= m.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "class index {} out of range for {} classes",
                self.class_index,
                m.num_classes()
            )));
        }
        Self::new(self.class_index, self.w).map(|_| ())
    }
}

pub fn full_distribution(m: &MixtureModel) -> DenseDistribution {
    m.full.clone()
}

/// Unnormalized log tilt `ln(p^-w p(.|z)^(1+w))` per state; `-inf` on
/// mask-containing states and outside the conditional support.
pub fn log_tilt_weights(m: &MixtureModel, g: &GuidanceConfig) -> Result<Vec<f64>> {
    g.check(m)?;
    let lp = log_probs(&m.full);
    let lq = log_probs(m.conditional(g.class_index));
    let space = m.space;
    Ok((0..space.total_states())
        .map(|i| {
            if space.is_unmasked(i) && lq[i] > f64::NEG_INFINITY {
                log_tilt(lp[i], lq[i], g.w)
            } else if space.is_unmasked(i) && g.w == -1.0 {
                lp[i]
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect())
}

/// `ln Z` with `Z = sum_x p(x)^-w p(x|z)^(1+w)`.
pub fn log_normalizer_z(m: &MixtureModel, g: &GuidanceConfig) -> Result<f64> {
    let lz = logsumexp(log_tilt_weights(m, g)?);
    if lz == f64::NEG_INFINITY {
        return Err(Error::UnnormalizableTilt);
    }
    Ok(lz)
}

pub fn normalizer_z(m: &MixtureModel, g: &GuidanceConfig) -> Result<f64> {
    log_normalizer_z(m, g).map(f64::exp)
}

/// The tilted distribution `p^{z,w} ∝ p^-w p(.|z)^(1+w)`.
pub fn tilted_distribution(m: &MixtureModel, g: &GuidanceConfig) -> Result<DenseDistribution> {
    let lw = log_tilt_weights(m, g)?;
    if lw.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::UnnormalizableTilt);
    }
    DenseDistribution::from_log_weights(m.space, &lw)
}

/// Support of the tilted target at the default threshold.
pub fn tilted_support(m: &MixtureModel, g: &GuidanceConfig) -> Result<crate::distribution::SupportSet> {
    Ok(support_of(&tilted_distribution(m, g)?, DEFAULT_TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point() -> MixtureModel {
        // p = (0.5, 0.5), p(.|z) = (1, 0) on N = 3
        let s = StateSpace::new(1, 3).unwrap();
        let c1 = DenseDistribution::from_unmasked(s, &[1.0, 0.0]).unwrap();
        let c2 = DenseDistribution::from_unmasked(s, &[0.0, 1.0]).unwrap();
        MixtureModel::new(s, vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![c1, c2]).unwrap()
    }

    #[test]
    fn single_class_is_identity() {
        let s = StateSpace::new(1, 4).unwrap();
        let c = DenseDistribution::from_unmasked(s, &[0.2, 0.3, 0.5]).unwrap();
        let m = MixtureModel::new(s, vec!["only".into()], vec![1.0], vec![c.clone()]).unwrap();
        assert_eq!(full_distribution(&m), c);
    }

    #[test]
    fn disjoint_pairs_average() {
        let s = StateSpace::new(1, 5).unwrap();
        let c1 = DenseDistribution::from_unmasked(s, &[0.5, 0.5, 0.0, 0.0]).unwrap();
        let c2 = DenseDistribution::from_unmasked(s, &[0.0, 0.0, 0.5, 0.5]).unwrap();
        let m = MixtureModel::new(s, vec!["1".into(), "2".into()], vec![0.5, 0.5], vec![c1, c2]).unwrap();
        assert_eq!(m.full().probs(), &[0.25, 0.25, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn rejects_bad_mixtures() {
        let s = StateSpace::new(1, 3).unwrap();
        let c = DenseDistribution::from_unmasked(s, &[0.5, 0.5]).unwrap();
        let masked = DenseDistribution::new(s, vec![0.5, 0.0, 0.5]).unwrap();
        assert!(MixtureModel::new(s, vec!["a".into()], vec![0.9], vec![c.clone()]).is_err());
        assert!(MixtureModel::new(s, vec!["a".into()], vec![1.0], vec![masked]).is_err());
        assert!(MixtureModel::new(
            s,
            vec!["a".into(), "b".into()],
            vec![1.0, 0.0],
            vec![c.clone(), c.clone()]
        )
        .is_err());
        assert!(MixtureModel::new(s, vec![], vec![], vec![]).is_err());
        assert!(GuidanceConfig::new(0, -1.5).is_err());
    }

    #[test]
    fn tilt_examples() {
        let m = two_point();
        let g1 = GuidanceConfig::new(0, 1.0).unwrap();
        let t = tilted_distribution(&m, &g1).unwrap();
        assert_eq!(t.probs(), &[1.0, 0.0, 0.0]);
        assert_relative_eq!(normalizer_z(&m, &g1).unwrap(), 2.0, epsilon = 1e-15);
        let gm1 = GuidanceConfig::new(0, -1.0).unwrap();
        assert_eq!(tilted_distribution(&m, &gm1).unwrap().probs(), m.full().probs());
        assert_relative_eq!(normalizer_z(&m, &gm1).unwrap(), 1.0, epsilon = 1e-15);
        let g0 = GuidanceConfig::new(0, 0.0).unwrap();
        assert_eq!(tilted_distribution(&m, &g0).unwrap().probs(), m.conditional(0).probs());
        assert_relative_eq!(normalizer_z(&m, &g0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let m = two_point();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"N\": 3"));
        let back = MixtureModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert!(MixtureModel::from_json("{\"N\": 3, \"D\": 1, \"classes\": []}").is_err());
        assert!(matches!(MixtureModel::from_json("not json"), Err(Error::Json(_))));
    }

    #[test]
    fn relabeling_keeps_full_distribution() {
        let m = two_point();
        let r = m.with_class_first(1);
        assert_eq!(r.labels()[0], "b");
        assert_eq!(r.full(), m.full());
        assert_eq!(r.class_index("a").unwrap(), 1);
    }
}
