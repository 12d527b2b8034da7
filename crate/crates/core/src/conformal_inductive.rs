//! Inductive (split) conformal prediction.
//!
//! The training set is split into a proper training set, whose counts `n_y`
//! define the scores, and a calibration set, whose counts `n'_y` calibrate
//! them. Only the two count vectors matter after the split.

use rand::seq::index;
use rand::Rng;

use crate::conformal_full::ScoreVariant;
use crate::criteria::{EValueVector, PValueParts, RankParts};
use crate::error::{invalid, Result};
use crate::model::{Dataset, LabelCounts, ModelSpec};

/// Proper-training and calibration counts of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub proper: LabelCounts,
    pub calib: LabelCounts,
}

impl Split {
    pub fn new(proper: LabelCounts, calib: LabelCounts) -> Result<Self> {
        if proper.num_labels() != calib.num_labels() {
            return Err(invalid("proper and calibration counts disagree on the label space"));
        }
        Ok(Self { proper, calib })
    }

    pub fn proper_size(&self) -> usize {
        self.proper.total()
    }

    pub fn calib_size(&self) -> usize {
        self.calib.total()
    }
}

/// Split `data` uniformly at random into a proper training set of size `m`
/// and a calibration set of size `l − m`.
pub fn random_split<R: Rng + ?Sized>(data: &Dataset, m: usize, rng: &mut R) -> Result<Split> {
    let l = data.len();
    if m == 0 || m >= l {
        return Err(invalid(format!("proper training size {m} outside 1..={}", l.saturating_sub(1))));
    }
    Ok(split_unchecked(data, m, rng))
}

/// Draws the smaller side as a uniform index subset; the other side is the
/// complement.
pub(crate) fn split_unchecked<R: Rng + ?Sized>(data: &Dataset, m: usize, rng: &mut R) -> Split {
    let l = data.len();
    let drawn = m.min(l - m);
    let mut sampled = LabelCounts::zeros(data.num_labels());
    for i in index::sample(rng, l, drawn) {
        sampled.increment(data.labels()[i]);
    }
    let rest = data.to_counts().minus(&sampled);
    if drawn == m {
        Split { proper: sampled, calib: rest }
    } else {
        Split { proper: rest, calib: sampled }
    }
}

/// Calibration observations strictly less conforming than, and tied with, a
/// postulated label whose proper count is `n_postulated`.
pub(crate) fn calibration_ranks(proper: &LabelCounts, calib: &LabelCounts, n_postulated: usize) -> (u64, u64) {
    let mut below = 0u64;
    let mut tied = 0u64;
    for (&n, &nc) in proper.counts().iter().zip(calib.counts()) {
        if n < n_postulated {
            below += nc as u64;
        } else if n == n_postulated {
            tied += nc as u64;
        }
    }
    (below, tied)
}

/// Inductive conformal p-values as exact rank counts over the calibration set
/// plus the test observation.
pub fn icp_rank_parts(split: &Split) -> Vec<RankParts> {
    let denom = split.calib_size() as u64 + 1;
    split
        .proper
        .counts()
        .iter()
        .map(|&n| {
            let (below, tied) = calibration_ranks(&split.proper, &split.calib, n);
            RankParts { below, tied: tied + 1, denom }
        })
        .collect()
}

pub fn icp_p_parts(split: &Split) -> Vec<PValueParts> {
    icp_rank_parts(split).into_iter().map(RankParts::to_parts).collect()
}

/// Nonconformity score of a label with proper count `n`:
/// `(m + Yα)/(n + α) − 1`, or without the `− 1` for the suboptimal variant.
pub fn icep_score(n: usize, proper_size: usize, spec: &ModelSpec, variant: ScoreVariant) -> f64 {
    (proper_size as f64 + spec.prior_mass()) / (n as f64 + spec.alpha) - variant.offset()
}

/// Inductive conformal e-values: the test score over the mean score of the
/// calibration set plus the test observation.
pub fn icep_e_values(split: &Split, spec: &ModelSpec, variant: ScoreVariant) -> EValueVector {
    let m = split.proper_size();
    let scores: Vec<f64> = split.proper.counts().iter().map(|&n| icep_score(n, m, spec, variant)).collect();
    let calib_sum: f64 = scores.iter().zip(split.calib.counts()).map(|(s, &nc)| nc as f64 * s).sum();
    let bag = split.calib_size() as f64 + 1.0;
    EValueVector::from_raw(scores.iter().map(|&s| bag * s / (calib_sum + s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn spec(y: usize) -> ModelSpec {
        ModelSpec::new(y, 0.5).unwrap()
    }

    fn split(proper: Vec<usize>, calib: Vec<usize>) -> Split {
        Split::new(LabelCounts::new(proper), LabelCounts::new(calib)).unwrap()
    }

    #[test]
    fn split_rejects_out_of_range_sizes() {
        let d = Dataset::new(vec![0, 1, 1], 2).unwrap();
        let mut rng = seeded(0);
        assert!(random_split(&d, 0, &mut rng).is_err());
        assert!(random_split(&d, 3, &mut rng).is_err());
        let s = random_split(&d, 2, &mut rng).unwrap();
        assert_eq!(s.calib_size(), 1);
    }

    #[test]
    fn split_is_uniform_over_observations() {
        let d = Dataset::new(vec![0, 1], 2).unwrap();
        let mut rng = seeded(1);
        let n = 100_000;
        let first_in_proper = (0..n).filter(|_| random_split(&d, 1, &mut rng).unwrap().proper.get(0) == 1).count();
        let se = (0.25 / n as f64).sqrt();
        assert!((first_in_proper as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn split_conserves_counts() {
        let mut rng = seeded(2);
        for i in 0..1000 {
            let l = 2 + i % 40;
            let labels: Vec<usize> = (0..l).map(|_| rng.random_range(0..4)).collect();
            let d = Dataset::new(labels, 4).unwrap();
            let m = 1 + (i * 7) % (l - 1);
            let s = random_split(&d, m, &mut rng).unwrap();
            assert_eq!(s.proper_size(), m);
            let joined: Vec<usize> = s.proper.counts().iter().zip(s.calib.counts()).map(|(a, b)| a + b).collect();
            assert_eq!(joined, d.to_counts().counts());
        }
    }

    #[test]
    fn icp_examples() {
        let s = split(vec![5, 3], vec![0, 1]);
        let p = icp_rank_parts(&s);
        assert_eq!(p[0], RankParts { below: 1, tied: 1, denom: 2 });
        let s = split(vec![4, 4, 4], vec![2, 3, 1]);
        for p in icp_rank_parts(&s) {
            assert_eq!(p, RankParts { below: 0, tied: 7, denom: 7 });
        }
    }

    #[test]
    fn icep_examples() {
        let s = split(vec![5, 3], vec![1, 1]);
        let e = icep_e_values(&s, &spec(2), ScoreVariant::Optimal);
        assert!((e.values()[0] - 49.0 / 73.0).abs() < 1e-14);

        let s = split(vec![3, 3, 3], vec![2, 2, 2]);
        for v in [ScoreVariant::Optimal, ScoreVariant::Suboptimal] {
            let e = icep_e_values(&s, &spec(3), v);
            assert!(e.values().iter().all(|x| (x - 1.0).abs() < 1e-14));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalization_identity(
                proper in proptest::collection::vec(0usize..30, 2..7),
                calib in proptest::collection::vec(0usize..30, 7),
                suboptimal: bool,
            ) {
                let y = proper.len();
                prop_assume!(proper.iter().sum::<usize>() > 0);
                let s = split(proper, calib[..y].to_vec());
                let v = ScoreVariant::from_flag(suboptimal);
                let e = icep_e_values(&s, &spec(y), v);
                let m = s.proper_size();
                for (postulated, &ey) in e.values().iter().enumerate() {
                    prop_assert!(ey > 0.0);
                    let test = icep_score(s.proper.get(postulated), m, &spec(y), v);
                    let norm = |score: f64| score * ey / test;
                    let total: f64 = s.proper.counts().iter().zip(s.calib.counts())
                        .map(|(&n, &nc)| nc as f64 * norm(icep_score(n, m, &spec(y), v)))
                        .sum::<f64>() + norm(test);
                    prop_assert!((total / (s.calib_size() as f64 + 1.0) - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn icp_b_at_least_one_over_bag(
                proper in proptest::collection::vec(0usize..10, 3),
                calib in proptest::collection::vec(0usize..10, 3),
            ) {
                let s = split(proper, calib);
                for p in icp_p_parts(&s) {
                    prop_assert!(p.b >= 1.0 / (s.calib_size() as f64 + 1.0) - 1e-15);
                    prop_assert!(p.a + p.b <= 1.0 + 1e-12);
                }
            }
        }
    }
}
