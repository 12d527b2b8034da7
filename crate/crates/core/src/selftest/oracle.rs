//! Reference implementations that share no code with the predictors they
//! check: numerical quadrature, brute-force ranking over the augmented bag,
//! and a Kolmogorov–Smirnov statistic.

use crate::criteria::RankParts;

const MAX_DEPTH: u32 = 30;

fn integrate_adaptive<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= MAX_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    integrate_adaptive(f, a, mid, 0.5 * tol, depth + 1) + integrate_adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// `−∫₀¹ ln(a + bτ) dτ` by tanh-sinh quadrature with interval bisection.
pub fn quadrature_p_surprisal(a: f64, b: f64, tol: f64) -> f64 {
    assert!(a >= 0.0 && b > 0.0, "need a >= 0 and b > 0");
    -integrate_adaptive(|t| (a + b * t).ln(), 0.0, 1.0, tol, 0)
}

/// Full conformal rank counts for postulated label `postulated`, found by
/// building the augmented bag and comparing every element's label frequency
/// with the test element's. Quadratic in the bag size.
pub fn brute_force_cp_rank(labels: &[usize], postulated: usize) -> RankParts {
    let mut bag = labels.to_vec();
    bag.push(postulated);
    let freq = |label: usize| bag.iter().filter(|&&x| x == label).count();
    let test_freq = freq(postulated);
    let (mut below, mut tied) = (0u64, 0u64);
    for &label in &bag {
        let f = freq(label);
        if f < test_freq {
            below += 1;
        } else if f == test_freq {
            tied += 1;
        }
    }
    RankParts { below, tied, denom: bag.len() as u64 }
}

/// One-sample KS distance between `samples` and U[0, 1].
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance `level` for `n` samples.
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_matches_known_integrals() {
        assert!((quadrature_p_surprisal(0.0, 1.0, 1e-12) - 1.0).abs() < 1e-10);
        let got = quadrature_p_surprisal(0.5, 0.5, 1e-12);
        assert!((got - (1.0 - 2f64.ln())).abs() < 1e-10, "{got}");
    }

    #[test]
    fn brute_force_small_case() {
        // counts (0, 5), postulated 1: every bag element shares the test's label.
        let r = brute_force_cp_rank(&[1, 1, 1, 1, 1], 1);
        assert_eq!((r.below, r.tied, r.denom), (0, 6, 6));
        let r = brute_force_cp_rank(&[1, 1, 1, 1, 1], 0);
        assert_eq!((r.below, r.tied, r.denom), (0, 1, 6));
    }

    #[test]
    fn ks_statistic_of_grid_is_small() {
        let n = 1000;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_uniform_statistic(&grid) - 0.5 / n as f64).abs() < 1e-12);
        assert!((ks_critical_value(100_000, 0.01) * 100_000f64.sqrt() - 1.6276).abs() < 1e-4);
    }
}
