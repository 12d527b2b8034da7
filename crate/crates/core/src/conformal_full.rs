//! Full conformal prediction for label-only classification.
//!
//! The conformity of an observation is the number of its label in the
//! augmented bag (training set plus postulated test label), which gives the
//! p-values of [`full_cp_rank_parts`]. The e-predictors use Bayesian
//! predictive odds as nonconformity scores, with an ordinariness parameter
//! `σ` interpolating between the deleted (`σ = 0`) and ordinary (`σ = 1`)
//! comparison bags.

use crate::criteria::{EValueVector, PValueParts, RankParts};
use crate::error::{invalid, Result};
use crate::model::{LabelCounts, ModelSpec};

/// Which nonconformity score an e-predictor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// Predictive odds against the label; tuned for AFES.
    #[default]
    Optimal,
    /// Inverse predictive probability (the odds without the `− 1`); tuned
    /// for modified AFES.
    Suboptimal,
}

impl ScoreVariant {
    pub fn from_flag(suboptimal: bool) -> Self {
        if suboptimal {
            Self::Suboptimal
        } else {
            Self::Optimal
        }
    }

    pub fn is_suboptimal(self) -> bool {
        self == Self::Suboptimal
    }

    /// The constant subtracted from a probability ratio to get the score.
    pub(crate) fn offset(self) -> f64 {
        match self {
            Self::Optimal => 1.0,
            Self::Suboptimal => 0.0,
        }
    }
}

/// Ordinariness `σ ∈ [0, 1]` of a conformal e-predictor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OrdinarinessSigma(f64);

impl OrdinarinessSigma {
    pub const DELETED: Self = Self(0.0);
    pub const ORDINARY: Self = Self(1.0);

    pub fn new(sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(invalid(format!("sigma must lie in [0, 1], got {sigma}")));
        }
        Ok(Self(sigma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for OrdinarinessSigma {
    fn default() -> Self {
        Self::DELETED
    }
}

/// Full conformal p-values as exact rank counts, one per postulated label.
pub fn full_cp_rank_parts(counts: &LabelCounts) -> Vec<RankParts> {
    let n = counts.counts();
    let denom = counts.total() as u64 + 1;
    (0..n.len())
        .map(|postulated| {
            let test_conformity = n[postulated] + 1;
            let mut below = 0u64;
            let mut tied = test_conformity as u64;
            for (y, &ny) in n.iter().enumerate() {
                if y == postulated {
                    continue;
                }
                if ny < test_conformity {
                    below += ny as u64;
                } else if ny == test_conformity {
                    tied += ny as u64;
                }
            }
            RankParts { below, tied, denom }
        })
        .collect()
}

pub fn full_cp_p_parts(counts: &LabelCounts) -> Vec<PValueParts> {
    full_cp_rank_parts(counts).into_iter().map(RankParts::to_parts).collect()
}

/// Score functions of the augmented bag for fixed training counts and `σ`.
#[derive(Debug, Clone, Copy)]
struct CepScoring {
    scale: f64,
    shift: f64,
    offset: f64,
}

impl CepScoring {
    fn new(counts: &LabelCounts, spec: &ModelSpec, sigma: OrdinarinessSigma, variant: ScoreVariant) -> Self {
        let s = sigma.value();
        Self { scale: counts.total() as f64 + s + spec.prior_mass(), shift: s + spec.alpha, offset: variant.offset() }
    }

    /// Score of a training observation with label `y` whose label is not the
    /// postulated one (its own copy is excluded from the count).
    /// The ratio is taken as 0 when `n_y = 0`; it is only ever multiplied by `n_y`.
    fn training(&self, n: usize) -> f64 {
        let ratio = if n == 0 { 0.0 } else { self.scale / (n as f64 - 1.0 + self.shift) };
        ratio - self.offset
    }

    /// Score of the test observation, and of training observations sharing
    /// the postulated label.
    fn test(&self, n: usize) -> f64 {
        self.scale / (n as f64 + self.shift) - self.offset
    }
}

/// Nonconformity scores of the augmented bag for one postulated label.
#[derive(Debug, Clone, PartialEq)]
pub struct CepScores {
    /// Score of a training observation of each label; 0 for labels that have
    /// no training observations.
    pub training: Vec<f64>,
    /// Score of the postulated test observation.
    pub test: f64,
}

pub fn cep_scores(
    counts: &LabelCounts,
    spec: &ModelSpec,
    sigma: OrdinarinessSigma,
    variant: ScoreVariant,
    postulated: usize,
) -> CepScores {
    let scoring = CepScoring::new(counts, spec, sigma, variant);
    let training = counts
        .counts()
        .iter()
        .enumerate()
        .map(|(y, &n)| match (y == postulated, n) {
            (true, _) => scoring.test(n),
            (false, 0) => 0.0,
            (false, _) => scoring.training(n),
        })
        .collect();
    CepScores { training, test: scoring.test(counts.get(postulated)) }
}

/// Conformal e-values: the test score divided by the mean score of the
/// augmented bag. Uses the precomputed bag sum `S`, so the whole vector costs
/// O(Y).
pub fn cep_e_values(
    counts: &LabelCounts,
    spec: &ModelSpec,
    sigma: OrdinarinessSigma,
    variant: ScoreVariant,
) -> EValueVector {
    let scoring = CepScoring::new(counts, spec, sigma, variant);
    let bag_size = counts.total() as f64 + 1.0;
    let total: f64 = counts.counts().iter().map(|&n| n as f64 * scoring.training(n)).sum();
    EValueVector::from_raw(
        counts
            .counts()
            .iter()
            .map(|&n| {
                let test = scoring.test(n);
                let bag = total - n as f64 * scoring.training(n) + (n as f64 + 1.0) * test;
                bag_size * test / bag
            })
            .collect(),
    )
}

/// Same e-values as [`cep_e_values`], evaluated label by label without the
/// shared bag sum (O(Y²)).
pub fn cep_e_values_direct(
    counts: &LabelCounts,
    spec: &ModelSpec,
    sigma: OrdinarinessSigma,
    variant: ScoreVariant,
) -> EValueVector {
    let scoring = CepScoring::new(counts, spec, sigma, variant);
    let n = counts.counts();
    let bag_size = counts.total() as f64 + 1.0;
    EValueVector::from_raw(
        (0..n.len())
            .map(|postulated| {
                let others: f64 = n
                    .iter()
                    .enumerate()
                    .filter(|&(y, _)| y != postulated)
                    .map(|(_, &ny)| ny as f64 * scoring.training(ny))
                    .sum();
                let own = (n[postulated] as f64 + 1.0) * scoring.test(n[postulated]);
                scoring.test(n[postulated]) / ((others + own) / bag_size)
            })
            .collect(),
    )
}
