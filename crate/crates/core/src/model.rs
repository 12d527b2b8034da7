//! Dirichlet-categorical data model and its posterior predictive rule.
//!
//! Labels are stored 0-based (`0..num_labels`); anything user-facing (CSV
//! output, CLI messages) reports them 1-based.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Absolute tolerance on `Σθ = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Label-space size and symmetric Dirichlet concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", deny_unknown_fields)]
pub struct ModelSpec {
    pub num_labels: usize,
    pub alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec {
    num_labels: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

fn default_alpha() -> f64 {
    ModelSpec::JEFFREYS
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = crate::Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        ModelSpec::new(raw.num_labels, raw.alpha)
    }
}

impl ModelSpec {
    /// Jeffreys's prior.
    pub const JEFFREYS: f64 = 0.5;

    pub fn new(num_labels: usize, alpha: f64) -> Result<Self> {
        if num_labels < 2 {
            return Err(invalid(format!("need at least 2 labels, got {num_labels}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
        }
        Ok(Self { num_labels, alpha })
    }

    /// `Y·α`, the total prior mass.
    pub fn prior_mass(&self) -> f64 {
        self.num_labels as f64 * self.alpha
    }
}

/// A point of the probability simplex over the labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("empty probability vector"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(num_labels: usize) -> Self {
        Self(vec![1.0 / num_labels as f64; num_labels])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Label with the smallest probability (lowest index on ties).
    pub fn least_likely(&self) -> usize {
        self.0.iter().enumerate().fold((0, f64::INFINITY), |best, (y, &p)| if p < best.1 { (y, p) } else { best }).0
    }
}

/// Per-label counts of a (sub)dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelCounts {
    counts: Vec<usize>,
    total: usize,
}

impl LabelCounts {
    pub fn new(counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(num_labels: usize) -> Self {
        Self { counts: vec![0; num_labels], total: 0 }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, label: usize) -> usize {
        self.counts[label]
    }

    pub fn increment(&mut self, label: usize) {
        self.counts[label] += 1;
        self.total += 1;
    }

    /// Component-wise `self − other`; `other` must be a sub-multiset.
    pub fn minus(&self, other: &LabelCounts) -> LabelCounts {
        debug_assert_eq!(self.num_labels(), other.num_labels());
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a.checked_sub(*b).expect("subtracting a non-subset"))
            .collect();
        LabelCounts { counts, total: self.total - other.total }
    }
}

/// A materialized sequence of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    labels: Vec<usize>,
    num_labels: usize,
}

impl Dataset {
    pub fn new(labels: Vec<usize>, num_labels: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&y| y >= num_labels) {
            return Err(invalid(format!("label {bad} outside 0..{num_labels}")));
        }
        Ok(Self { labels, num_labels })
    }

    /// Sorted dataset with the given counts. Split-based predictors only see
    /// uniformly random subsets, so the order of observations is immaterial.
    pub fn from_counts(counts: &LabelCounts) -> Self {
        let labels = counts.counts().iter().enumerate().flat_map(|(y, &n)| std::iter::repeat_n(y, n)).collect();
        Self { labels, num_labels: counts.num_labels() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn to_counts(&self) -> LabelCounts {
        let mut counts = vec![0; self.num_labels];
        for &y in &self.labels {
            counts[y] += 1;
        }
        LabelCounts::new(counts)
    }
}

/// Draw θ ~ Dir(α, …, α) by normalizing independent Gamma(α, 1) variates.
pub fn sample_theta<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Theta {
    let gamma = Gamma::new(spec.alpha, 1.0).expect("alpha validated positive");
    loop {
        let draws: Vec<f64> = (0..spec.num_labels).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // all-underflow is only possible for tiny alpha
        if sum > 0.0 && sum.is_finite() {
            let mut probs: Vec<f64> = draws.iter().map(|g| g / sum).collect();
            let drift: f64 = probs.iter().sum::<f64>() - 1.0;
            let top = probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
            probs[top] -= drift;
            return Theta(probs);
        }
    }
}

/// `size` i.i.d. categorical draws from θ.
pub fn sample_dataset<R: Rng + ?Sized>(theta: &Theta, size: usize, rng: &mut R) -> Dataset {
    let dist = WeightedIndex::new(theta.probs()).expect("theta has positive mass");
    let labels = (0..size).map(|_| dist.sample(rng)).collect();
    Dataset { labels, num_labels: theta.len() }
}

/// Multinomial(size, θ) counts, drawn as a chain of conditional binomials.
/// Same distribution as `sample_dataset(..).to_counts()` in O(Y) draws.
pub fn sample_counts<R: Rng + ?Sized>(theta: &Theta, size: usize, rng: &mut R) -> LabelCounts {
    let probs = theta.probs();
    let mut counts = vec![0usize; probs.len()];
    let mut remaining = size as u64;
    let mut mass_left = 1.0f64;
    for (y, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if y + 1 == probs.len() {
            counts[y] = remaining as usize;
            break;
        }
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
        let n = Binomial::new(remaining, q).expect("probability clamped").sample(rng);
        counts[y] = n as usize;
        remaining -= n;
        mass_left -= p;
    }
    LabelCounts::new(counts)
}

/// Posterior predictive `P(y) = (n_y + α) / (n + Yα)`.
pub fn predictive(counts: &LabelCounts, spec: &ModelSpec) -> Theta {
    let denom = counts.total() as f64 + spec.prior_mass();
    Theta(counts.counts().iter().map(|&n| (n as f64 + spec.alpha) / denom).collect())
}
