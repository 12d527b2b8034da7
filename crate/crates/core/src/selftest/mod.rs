//! Oracle and equivalence checks behind the `selftest` subcommand and the
//! acceptance suite.

pub mod oracle;

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::aggregation::{
    bicep_e_values, ccep_e_values, ccp_rank_parts, jensen_gap, make_folds, ricep_e_values, CalibSizePrior, FoldPlan,
    RicepPlan,
};
use crate::bayes::{bayes_e_values, bayes_p_parts, suboptimal_bayes_e_values};
use crate::conformal_full::{
    cep_e_values, cep_e_values_direct, cep_scores, full_cp_p_parts, full_cp_rank_parts, OrdinarinessSigma, ScoreVariant,
};
use crate::conformal_inductive::{icep_e_values, icep_score, icp_p_parts, random_split, Split};
use crate::criteria::{expected_p_surprisal, PValueParts};
use crate::model::{predictive, sample_dataset, sample_theta, Dataset, LabelCounts, ModelSpec};
use crate::rng::{child_rng, seeded};

use oracle::{brute_force_cp_rank, ks_critical_value, ks_uniform_statistic, mean_and_se, quadrature_p_surprisal};

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// Leave-one-out CCP against full CP (and against the brute-force ranking)
/// on `cases` random small datasets. Comparison is on integer rank counts.
pub fn loo_equivalence(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = seeded(seed);
    let mut mismatches = 0;
    for _ in 0..cases {
        let y = rng.random_range(2..=4);
        let l = rng.random_range(4..=30);
        let labels: Vec<usize> = (0..l).map(|_| rng.random_range(0..y)).collect();
        let data = Dataset::new(labels, y).expect("labels in range");
        let full = full_cp_rank_parts(&data.to_counts());
        let loo = ccp_rank_parts(&data, &FoldPlan::leave_one_out(l).expect("l >= 2"));
        let brute: Vec<_> = (0..y).map(|p| brute_force_cp_rank(data.labels(), p)).collect();
        if full != loo || full != brute {
            mismatches += 1;
        }
    }
    CheckOutcome::new(
        "leave-one-out CCP equals full CP",
        mismatches == 0,
        format!("{mismatches} mismatching datasets out of {cases}"),
    )
}

/// Closed-form expected p-surprisal against quadrature on `cases` random
/// `(a, b)` pairs, the first `zero_cases` of which have `a = 0`.
pub fn p_surprisal_quadrature(cases: usize, zero_cases: usize, tol: f64, seed: u64) -> CheckOutcome {
    let mut rng = seeded(seed);
    let pairs: Vec<(f64, f64)> = (0..cases)
        .map(|i| {
            let a = if i < zero_cases {
                0.0
            } else if i % 2 == 0 {
                10f64.powf(rng.random_range(-12.0..0.0))
            } else {
                rng.random_range(0.0..1.0)
            };
            let b = rng.random_range(1e-6..=1.0) * (1.0 - a);
            (a, b.max(1e-9))
        })
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(a, b)| {
            let closed = expected_p_surprisal(PValueParts { a, b });
            (closed - quadrature_p_surprisal(a, b, tol * 1e-2)).abs()
        })
        .reduce(|| 0.0, f64::max);
    CheckOutcome::new(
        "expected p-surprisal matches quadrature",
        worst <= tol,
        format!("max abs error {worst:.3e} over {cases} pairs ({zero_cases} with a = 0), tolerance {tol:.0e}"),
    )
}

/// Settings of the validity simulations.
#[derive(Debug, Clone, Copy)]
pub struct ValiditySettings {
    pub simulations: usize,
    pub training_size: usize,
    pub num_labels: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ValiditySettings {
    fn default() -> Self {
        Self { simulations: 100_000, training_size: 50, num_labels: 5, alpha: 0.5, seed: 0x5eed_1d17 }
    }
}

const P_NAMES: [&str; 4] = ["Bayes", "full CP", "ICP", "CCP"];
const E_NAMES: [&str; 9] = [
    "optimal Bayes",
    "suboptimal Bayes",
    "CEP",
    "ordinary CEP",
    "ICEP",
    "CCEP",
    "inverse CCEP",
    "RICEP 10",
    "BICEP 10",
];

struct Draw {
    p: [f64; 4],
    e: [f64; 9],
    bayes_identity_error: f64,
}

fn validity_draw(s: &ValiditySettings, spec: &ModelSpec, prior: &CalibSizePrior, index: u64) -> Draw {
    let l = s.training_size;
    let mut rng = child_rng(s.seed, index, 0);
    let theta = sample_theta(spec, &mut rng);
    let all = sample_dataset(&theta, l + 1, &mut rng);
    let test = all.labels()[l];
    let data = Dataset::new(all.labels()[..l].to_vec(), spec.num_labels).expect("labels in range");
    let counts = data.to_counts();
    let tau: f64 = rng.random();

    let proper = l * 4 / 5;
    let folds = 5;
    let split = random_split(&data, proper, &mut rng).expect("valid proper size");
    let plan = make_folds(&data, folds, &mut rng).expect("l divisible by K");
    let opt = ScoreVariant::Optimal;
    let p = [
        bayes_p_parts(&counts, spec)[test].at(tau),
        full_cp_p_parts(&counts)[test].at(tau),
        icp_p_parts(&split)[test].at(tau),
        ccp_rank_parts(&data, &plan)[test].to_parts().at(tau),
    ];

    let pred = predictive(&counts, spec);
    let e_opt = bayes_e_values(&counts, spec);
    let e_sub = suboptimal_bayes_e_values(&counts, spec);
    let mix = |e: &[f64]| pred.probs().iter().zip(e).map(|(p, e)| p * e).sum::<f64>();
    let bayes_identity_error = (mix(e_opt.values()) - 1.0).abs().max((mix(e_sub.values()) - 1.0).abs());

    let ricep = RicepPlan::new(l, proper, 10).expect("valid plan");
    let e = [
        e_opt.values()[test],
        e_sub.values()[test],
        cep_e_values(&counts, spec, OrdinarinessSigma::DELETED, opt).values()[test],
        cep_e_values(&counts, spec, OrdinarinessSigma::ORDINARY, opt).values()[test],
        icep_e_values(&split, spec, opt).values()[test],
        ccep_e_values(&data, &plan, spec, opt, false).values()[test],
        ccep_e_values(&data, &plan, spec, opt, true).values()[test],
        ricep_e_values(&data, &ricep, spec, opt, &mut rng).values()[test],
        bicep_e_values(&data, prior, 10, spec, opt, &mut rng).expect("prior fits").values()[test],
    ];
    Draw { p, e, bayes_identity_error }
}

/// True-label validity: smoothed p-values pass a KS test against U[0, 1] at
/// the 1% level, and e-values have mean at most `1 + 3·SE`. Labels are drawn
/// i.i.d. given a Dirichlet θ, so the data are exchangeable and also follow
/// the Bayesian model.
pub fn validity_suite(settings: &ValiditySettings) -> Vec<CheckOutcome> {
    let spec = ModelSpec::new(settings.num_labels, settings.alpha).expect("valid model");
    let prior = CalibSizePrior::uniform(settings.training_size).expect("l >= 2");
    let draws: Vec<Draw> =
        (0..settings.simulations as u64).into_par_iter().map(|i| validity_draw(settings, &spec, &prior, i)).collect();
    let n = draws.len();
    let critical = ks_critical_value(n, 0.01);
    let mut out = Vec::new();
    for (k, name) in P_NAMES.iter().enumerate() {
        let ps: Vec<f64> = draws.iter().map(|d| d.p[k]).collect();
        let d = ks_uniform_statistic(&ps);
        out.push(CheckOutcome::new(
            format!("{name} p-value uniformity"),
            d < critical,
            format!("KS {d:.5} vs critical {critical:.5} over {n} draws"),
        ));
    }
    for (k, name) in E_NAMES.iter().enumerate() {
        let es: Vec<f64> = draws.iter().map(|d| d.e[k]).collect();
        let (mean, se) = mean_and_se(&es);
        out.push(CheckOutcome::new(
            format!("{name} e-value validity"),
            mean <= 1.0 + 3.0 * se,
            format!("mean {mean:.5} vs bound {:.5} over {n} draws", 1.0 + 3.0 * se),
        ));
    }
    let worst = draws.iter().map(|d| d.bayes_identity_error).fold(0.0, f64::max);
    out.push(CheckOutcome::new(
        "Bayes e-values average to 1 under the predictive",
        worst <= 1e-12,
        format!("max deviation {worst:.3e}"),
    ));
    out
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn random_counts<R: Rng + ?Sized>(rng: &mut R, y: usize, max: usize, min_total: usize) -> LabelCounts {
    loop {
        let c = LabelCounts::new((0..y).map(|_| rng.random_range(0..=max)).collect());
        if c.total() >= min_total {
            return c;
        }
    }
}

/// Exact algebraic identities over `cases` random count vectors.
pub fn identity_checks(cases: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = seeded(seed);
    let (mut sub_mix, mut opt_odds, mut cep_quick, mut cep_bag, mut icep_bag) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..cases {
        let y = rng.random_range(2..=12);
        let alpha = [0.5, 1.0, rng.random_range(0.05..3.0)][rng.random_range(0..3)];
        let spec = ModelSpec::new(y, alpha).expect("valid model");
        let max = [3, 40, 2_000][rng.random_range(0..3)];
        let counts = random_counts(&mut rng, y, max, 1);
        let p = predictive(&counts, &spec);

        let sub = suboptimal_bayes_e_values(&counts, &spec);
        let mix: f64 = p.probs().iter().zip(sub.values()).map(|(p, e)| p * e).sum();
        sub_mix = sub_mix.max((mix - 1.0).abs());

        let opt = bayes_e_values(&counts, &spec);
        for (py, ey) in p.probs().iter().zip(opt.values()) {
            opt_odds = opt_odds.max(rel_err(*ey, (1.0 - py) / py / (y as f64 - 1.0)));
        }

        let sigma = OrdinarinessSigma::new(rng.random_range(0.0..=1.0)).expect("sigma in range");
        for variant in [ScoreVariant::Optimal, ScoreVariant::Suboptimal] {
            let quick = cep_e_values(&counts, &spec, sigma, variant);
            let direct = cep_e_values_direct(&counts, &spec, sigma, variant);
            for (q, d) in quick.values().iter().zip(direct.values()) {
                cep_quick = cep_quick.max((q - d).abs() / d.abs().max(f64::MIN_POSITIVE));
            }
            for postulated in 0..y {
                let s = cep_scores(&counts, &spec, sigma, variant, postulated);
                cep_bag = cep_bag.max(bag_average_deviation(counts.counts(), &s.training, s.test));
            }

            let proper = random_counts(&mut rng, y, max, 1);
            let calib = random_counts(&mut rng, y, max, 0);
            let m = proper.total();
            let scores: Vec<f64> = (0..y).map(|k| icep_score(proper.get(k), m, &spec, variant)).collect();
            let split = Split::new(proper, calib.clone()).expect("valid split");
            let e = icep_e_values(&split, &spec, variant);
            for postulated in 0..y {
                icep_bag = icep_bag.max(bag_average_deviation(calib.counts(), &scores, scores[postulated]));
                let bag_sum: f64 =
                    calib.counts().iter().zip(&scores).map(|(&n, s)| n as f64 * s).sum::<f64>() + scores[postulated];
                let want = scores[postulated] * (calib.total() as f64 + 1.0) / bag_sum;
                icep_bag = icep_bag.max(rel_err(e.values()[postulated], want));
            }
        }
    }
    vec![
        CheckOutcome::new("suboptimal Bayes mixes to 1", sub_mix <= 1e-12, format!("max deviation {sub_mix:.3e}")),
        CheckOutcome::new("optimal Bayes odds form", opt_odds <= 1e-12, format!("max relative error {opt_odds:.3e}")),
        CheckOutcome::new(
            "CEP quick form equals direct form",
            cep_quick <= 1e-12,
            format!("max relative error {cep_quick:.3e}"),
        ),
        CheckOutcome::new("CEP bag average is 1", cep_bag <= 1e-12, format!("max deviation {cep_bag:.3e}")),
        CheckOutcome::new("ICEP bag average is 1", icep_bag <= 1e-12, format!("max deviation {icep_bag:.3e}")),
    ]
}

/// Normalize every element of the bag (training elements with per-label
/// scores plus the test element) by the bag mean, and
/// return how far the mean of the normalized values is from 1.
fn bag_average_deviation(counts: &[usize], scores: &[f64], test: f64) -> f64 {
    let mut bag: Vec<f64> = Vec::new();
    for (label, &n) in counts.iter().enumerate() {
        bag.extend(std::iter::repeat_n(scores[label], n));
    }
    bag.push(test);
    let mean = bag.iter().sum::<f64>() / bag.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let normalized = bag.iter().map(|s| s / mean).sum::<f64>() / bag.len() as f64;
    (normalized - 1.0).abs()
}

/// Jensen gap is non-negative on `cases` random positive vectors and exactly
/// zero on constant ones.
pub fn jensen_checks(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = seeded(seed);
    let mut negative = 0;
    let mut nonzero_constant = 0;
    for _ in 0..cases {
        let len = rng.random_range(1..=50);
        let scale = 10f64.powf(rng.random_range(-6.0..6.0));
        let v: Vec<f64> = (0..len).map(|_| scale * rng.random_range(1e-3..10.0)).collect();
        if jensen_gap(&v).expect("positive input") < 0.0 {
            negative += 1;
        }
        let c = vec![v[0]; len];
        if jensen_gap(&c).expect("positive input") != 0.0 {
            nonzero_constant += 1;
        }
    }
    CheckOutcome::new(
        "Jensen gap non-negative, zero on constants",
        negative == 0 && nonzero_constant == 0,
        format!("{negative} negative and {nonzero_constant} nonzero-constant gaps over {cases} vectors"),
    )
}

/// Every check, with the validity suite at `simulations` draws per predictor.
pub fn run_selftest(simulations: usize) -> Vec<CheckOutcome> {
    let mut out = vec![loo_equivalence(200, 1), p_surprisal_quadrature(1_000, 100, 1e-9, 2)];
    out.extend(identity_checks(1_000, 3));
    out.push(jensen_checks(10_000, 4));
    out.extend(validity_suite(&ValiditySettings { simulations, ..Default::default() }));
    out
}
