//! Bayes-optimal reference predictors under the Dirichlet-categorical model.

use crate::criteria::{EValueVector, PValueParts};
use crate::model::{predictive, LabelCounts, ModelSpec};

/// Smoothed Bayesian p-values `A_y + τB_y`: `A_y` is the predictive mass of
/// strictly less probable labels, `B_y` the mass of labels tied with `y`.
///
/// Ties are decided on the integer counts, since `P(y) = P(y')` exactly when
/// `n_y = n_y'`.
pub fn bayes_p_parts(counts: &LabelCounts, spec: &ModelSpec) -> Vec<PValueParts> {
    let p = predictive(counts, spec);
    let n = counts.counts();
    n.iter()
        .map(|&ny| {
            let (mut a, mut b) = (0.0, 0.0);
            for (&nz, &pz) in n.iter().zip(p.probs()) {
                if nz < ny {
                    a += pz;
                } else if nz == ny {
                    b += pz;
                }
            }
            PValueParts { a, b }
        })
        .collect()
}

/// Optimal Bayesian e-values, the normalized predictive odds against each label:
/// `e_y = ((l + Yα)/(n_y + α) − 1) / (Y − 1)`.
pub fn bayes_e_values(counts: &LabelCounts, spec: &ModelSpec) -> EValueVector {
    let total = counts.total() as f64 + spec.prior_mass();
    let scale = 1.0 / (spec.num_labels - 1) as f64;
    EValueVector::from_raw(counts.counts().iter().map(|&n| scale * (total / (n as f64 + spec.alpha) - 1.0)).collect())
}

/// Suboptimal Bayesian e-values, inverse predictive probabilities over `Y`:
/// `e_y = (l + Yα) / (Y (n_y + α))`.
pub fn suboptimal_bayes_e_values(counts: &LabelCounts, spec: &ModelSpec) -> EValueVector {
    let total = counts.total() as f64 + spec.prior_mass();
    let y = spec.num_labels as f64;
    EValueVector::from_raw(counts.counts().iter().map(|&n| total / (y * (n as f64 + spec.alpha))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(y: usize) -> ModelSpec {
        ModelSpec::new(y, 0.5).unwrap()
    }

    #[test]
    fn p_parts_examples() {
        let s = spec(2);
        for p in bayes_p_parts(&LabelCounts::zeros(2), &s) {
            assert_eq!((p.a, p.b), (0.0, 1.0));
        }
        let p = bayes_p_parts(&LabelCounts::new(vec![3, 7]), &s);
        assert_eq!(p[0].a, 0.0);
        assert!((p[0].b - 3.5 / 11.0).abs() < 1e-15);
        assert!((p[1].a - 3.5 / 11.0).abs() < 1e-15);
        assert!((p[1].b - 7.5 / 11.0).abs() < 1e-15);

        for p in bayes_p_parts(&LabelCounts::new(vec![4; 7]), &spec(7)) {
            assert_eq!(p.a, 0.0);
            assert!((p.b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn e_value_examples() {
        let s = spec(2);
        let e = bayes_e_values(&LabelCounts::new(vec![0, 10]), &s);
        assert!((e.values()[0] - 21.0).abs() < 1e-12);
        assert!((e.values()[1] - (11.0 / 10.5 - 1.0)).abs() < 1e-15);

        let e = suboptimal_bayes_e_values(&LabelCounts::new(vec![0, 10]), &s);
        assert!((e.values()[0] - 11.0).abs() < 1e-12);
        assert!((e.values()[1] - 11.0 / 21.0).abs() < 1e-15);

        let uniform = LabelCounts::new(vec![30; 5]);
        for e in [bayes_e_values(&uniform, &spec(5)), suboptimal_bayes_e_values(&uniform, &spec(5))] {
            assert!(e.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn e_values_decrease_with_count() {
        let e = bayes_e_values(&LabelCounts::new(vec![0, 1, 5, 20]), &spec(4));
        assert!(e.values().windows(2).all(|w| w[0] > w[1] && w[1] > 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn p_parts_structure(counts in proptest::collection::vec(0usize..6, 2..7)) {
                let s = spec(counts.len());
                let lc = LabelCounts::new(counts.clone());
                let p = predictive(&lc, &s);
                let parts = bayes_p_parts(&lc, &s);
                for (y, part) in parts.iter().enumerate() {
                    prop_assert!(part.b >= p.probs()[y]);
                    let upto: f64 = counts.iter().zip(p.probs())
                        .filter(|(&n, _)| n <= counts[y]).map(|(_, q)| q).sum();
                    prop_assert!((part.a + part.b - upto).abs() < 1e-12);
                }
            }

            #[test]
            fn e_values_are_odds_and_inverse_probabilities(
                counts in proptest::collection::vec(0usize..200, 2..12),
                alpha in 0.05f64..3.0,
            ) {
                let s = ModelSpec::new(counts.len(), alpha).unwrap();
                let lc = LabelCounts::new(counts);
                let p = predictive(&lc, &s);
                let e = bayes_e_values(&lc, &s);
                let sub = suboptimal_bayes_e_values(&lc, &s);
                let y1 = (s.num_labels - 1) as f64;
                let mut mix = 0.0;
                for ((&py, &ey), &sy) in p.probs().iter().zip(e.values()).zip(sub.values()) {
                    let odds = (1.0 - py) / py / y1;
                    prop_assert!((ey - odds).abs() <= 1e-12 * odds.max(1.0));
                    mix += py * sy;
                }
                prop_assert!((mix - 1.0).abs() < 1e-12);
            }
        }
    }
}
