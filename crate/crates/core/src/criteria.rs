//! Efficiency criteria in their infinite-test-set form.
//!
//! A smoothed p-value is `p = a + τ·b` with `τ ~ U[0,1]`; the quality of a
//! p-predictor for a fixed training set is the average false p-surprisal,
//! `Σ_y (1 − θ_y) F(a_y, b_y) / (Y − 1)`, where `F(a, b) = E_τ[−ln(a + τb)]`.
//! E-predictors are scored by the analogous average of `ln e_y` (AFES) or by
//! the θ-free mean of `ln e_y` over all labels (modified AFES).

use crate::error::{invalid, Result};
use crate::model::Theta;

/// Below this `a` is treated as zero in [`expected_p_surprisal`].
pub const ZERO_A_THRESHOLD: f64 = 1e-300;

/// The `(a, b)` decomposition of a smoothed p-value `a + τb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueParts {
    pub a: f64,
    pub b: f64,
}

impl PValueParts {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b > 0.0 && a + b <= 1.0 + 1e-12) {
            return Err(invalid(format!("invalid p-value parts a={a}, b={b}")));
        }
        Ok(Self { a, b })
    }

    /// The p-value at a given `τ`.
    pub fn at(&self, tau: f64) -> f64 {
        self.a + tau * self.b
    }
}

/// A conformal p-value as exact integer rank counts: `a = below / denom`,
/// `b = tied / denom`. `tied` already includes the test observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankParts {
    pub below: u64,
    pub tied: u64,
    pub denom: u64,
}

impl RankParts {
    pub fn to_parts(self) -> PValueParts {
        let d = self.denom as f64;
        PValueParts { a: self.below as f64 / d, b: self.tied as f64 / d }
    }
}

/// One e-value per candidate label.
#[derive(Debug, Clone, PartialEq)]
pub struct EValueVector(Vec<f64>);

impl EValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|e| e.is_nan() || *e < 0.0) {
            return Err(invalid("e-values must be non-negative"));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|e| *e >= 0.0), "{values:?}");
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Component-wise arithmetic mean of equally long e-vectors, accumulated
    /// in iteration order.
    pub fn mean<'a, I>(vectors: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a EValueVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            for (s, e) in sum.iter_mut().zip(&v.0) {
                *s += e;
            }
            n += 1;
        }
        Some(Self(sum.into_iter().map(|s| s / n as f64).collect()))
    }
}

/// Average log-surprisal; larger is better. May be `-inf` when an e-value is 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QualityScore(pub f64);

impl QualityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `F(a, b) = −∫₀¹ ln(a + bτ) dτ`.
pub fn expected_p_surprisal(parts: PValueParts) -> f64 {
    let PValueParts { a, b } = parts;
    if a < ZERO_A_THRESHOLD {
        return 1.0 - b.ln();
    }
    (a / b) * a.ln() + 1.0 - ((a + b) / b) * (a + b).ln()
}

/// `−ln(a + b)`, the surprisal of the deterministic p-value (`τ = 1`).
pub fn deterministic_p_surprisal(parts: PValueParts) -> f64 {
    -(parts.a + parts.b).ln()
}

fn false_label_weights(theta: &Theta) -> impl Iterator<Item = f64> + '_ {
    let denom = (theta.len() - 1) as f64;
    theta.probs().iter().map(move |t| (1.0 - t) / denom)
}

/// Average false p-surprisal for a fixed training set and an infinite test set.
pub fn afs_quality(theta: &Theta, parts: &[PValueParts], smoothed: bool) -> QualityScore {
    assert_eq!(theta.len(), parts.len(), "one p-value per label");
    let surprisal = if smoothed { expected_p_surprisal } else { deterministic_p_surprisal };
    QualityScore(false_label_weights(theta).zip(parts).map(|(w, &p)| w * surprisal(p)).sum())
}

fn weighted_log_sum(weights: impl Iterator<Item = f64>, e: &EValueVector) -> f64 {
    let mut total = 0.0;
    for (w, &v) in weights.zip(e.values()) {
        if w == 0.0 {
            continue;
        }
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += w * v.ln();
    }
    total
}

/// Average false e-surprisal for a fixed training set and an infinite test set.
pub fn afes_quality(theta: &Theta, e: &EValueVector) -> QualityScore {
    assert_eq!(theta.len(), e.len(), "one e-value per label");
    QualityScore(weighted_log_sum(false_label_weights(theta), e))
}

/// Modified AFES: the mean of `ln e_y` over all labels, independent of θ.
pub fn afes16_quality(e: &EValueVector) -> QualityScore {
    let w = 1.0 / e.len() as f64;
    QualityScore(weighted_log_sum(std::iter::repeat(w), e))
}
