//! Reproducible Monte Carlo experiments.
//!
//! Iteration `i` draws θ and a training set from stream `(seed, i, 0)`; the
//! `j`-th predictor gets its own split/fold randomness from `(seed, i, j + 1)`.
//! Every predictor in a config sees the same θ and training set in a given
//! iteration. Iterations run in parallel and are reduced in index order, so
//! the output does not depend on the thread count.

mod config;
pub mod figures;
mod histogram;
mod results;

use rand::Rng;
use rayon::prelude::*;

use crate::aggregation::{bicep_e_values, ccep_e_values, ccp_p_parts, make_folds, ricep_e_values};
use crate::bayes::{bayes_e_values, bayes_p_parts, suboptimal_bayes_e_values};
use crate::conformal_full::{cep_e_values, full_cp_p_parts, ScoreVariant};
use crate::conformal_inductive::{icep_e_values, icp_p_parts, random_split};
use crate::criteria::{afes16_quality, afes_quality, afs_quality, EValueVector, PValueParts};
use crate::error::Result;
use crate::model::{sample_counts, sample_theta, Dataset, LabelCounts, ModelSpec, Theta};
use crate::rng::{child_rng, SimRng, DATA_STREAM};

pub use config::{CompiledPredictor, Criterion, ExperimentConfig, Method, PredictorEntry, PredictorKind, PriorSpec};
pub use histogram::{run_histogram_experiment, write_histogram, HistogramOutcome};
pub use results::{format_float, read_results, write_results, ResultRecord, CSV_HEADER};

/// θ and training set of one iteration.
#[derive(Debug, Clone)]
pub struct IterationDraw {
    pub theta: Theta,
    pub counts: LabelCounts,
}

impl IterationDraw {
    /// The training set as a sequence of observations (sorted by label).
    pub fn dataset(&self) -> Dataset {
        Dataset::from_counts(&self.counts)
    }
}

/// Reproduce the θ and training set of iteration `i`.
pub fn draw_iteration(config: &ExperimentConfig, iteration: u64) -> IterationDraw {
    let mut rng = child_rng(config.master_seed, iteration, DATA_STREAM);
    let theta = sample_theta(&config.model, &mut rng);
    let counts = sample_counts(&theta, config.training_size, &mut rng);
    IterationDraw { theta, counts }
}

/// The generator handed to predictor `index` in iteration `i`.
pub fn predictor_rng(config: &ExperimentConfig, iteration: u64, index: usize) -> SimRng {
    child_rng(config.master_seed, iteration, index as u64 + 1)
}

/// Output of one predictor on one training set.
#[derive(Debug, Clone)]
pub enum Prediction {
    P(Vec<PValueParts>),
    E(EValueVector),
}

impl Method {
    /// Run the predictor. `data` must be present when [`Method::needs_dataset`].
    pub fn predict<R: Rng + ?Sized>(
        &self,
        spec: &ModelSpec,
        counts: &LabelCounts,
        data: Option<&Dataset>,
        rng: &mut R,
    ) -> Prediction {
        let data = || data.expect("split-based predictor needs the dataset");
        match self {
            Method::PBayes => Prediction::P(bayes_p_parts(counts, spec)),
            Method::EBayes(ScoreVariant::Optimal) => Prediction::E(bayes_e_values(counts, spec)),
            Method::EBayes(ScoreVariant::Suboptimal) => Prediction::E(suboptimal_bayes_e_values(counts, spec)),
            Method::FullCp => Prediction::P(full_cp_p_parts(counts)),
            Method::Cep(sigma, v) => Prediction::E(cep_e_values(counts, spec, *sigma, *v)),
            Method::Icp(m) => {
                let split = random_split(data(), *m, rng).expect("validated proper size");
                Prediction::P(icp_p_parts(&split))
            }
            Method::Icep(m, v) => {
                let split = random_split(data(), *m, rng).expect("validated proper size");
                Prediction::E(icep_e_values(&split, spec, *v))
            }
            Method::Ccp(k) => {
                let plan = make_folds(data(), *k, rng).expect("validated folds");
                Prediction::P(ccp_p_parts(data(), &plan))
            }
            Method::Ccep { folds, inverse, variant } => {
                let plan = make_folds(data(), *folds, rng).expect("validated folds");
                Prediction::E(ccep_e_values(data(), &plan, spec, *variant, *inverse))
            }
            Method::Ricep(plan, v) => Prediction::E(ricep_e_values(data(), plan, spec, *v, rng)),
            Method::Bicep { prior, repetitions, variant } => Prediction::E(
                bicep_e_values(data(), prior, *repetitions, spec, *variant, rng).expect("validated prior"),
            ),
        }
    }
}

/// Quality of a prediction under `criterion` for the realized θ.
pub fn score(prediction: &Prediction, theta: &Theta, criterion: Criterion) -> f64 {
    match (prediction, criterion) {
        (Prediction::P(parts), Criterion::AfsSmoothed) => afs_quality(theta, parts, true).value(),
        (Prediction::P(parts), Criterion::AfsDeterministic) => afs_quality(theta, parts, false).value(),
        (Prediction::E(e), Criterion::Afes) => afes_quality(theta, e).value(),
        (Prediction::E(e), Criterion::Afes16) => afes16_quality(e).value(),
        (p, c) => panic!("criterion {c:?} does not apply to {p:?}"),
    }
}

/// Per-iteration qualities plus the averaged records.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub records: Vec<ResultRecord>,
    /// `qualities[i][j]`: quality of predictor `j` in iteration `i`.
    pub qualities: Vec<Vec<f64>>,
}

impl ExperimentRun {
    /// Mean and standard error of the paired per-iteration difference
    /// `quality[a] − quality[b]`.
    pub fn paired_difference(&self, a: usize, b: usize) -> (f64, f64) {
        let diffs: Vec<f64> = self.qualities.iter().map(|q| q[a] - q[b]).collect();
        mean_and_std_error(&diffs)
    }
}

fn evaluate_iteration(config: &ExperimentConfig, predictors: &[CompiledPredictor], i: u64) -> Vec<f64> {
    let draw = draw_iteration(config, i);
    let data = predictors.iter().any(|p| p.method.needs_dataset()).then(|| draw.dataset());
    predictors
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut rng = predictor_rng(config, i, j);
            let prediction = p.method.predict(&config.model, &draw.counts, data.as_ref(), &mut rng);
            score(&prediction, &draw.theta, p.criterion)
        })
        .collect()
}

/// Sample mean and `sd / √n`. A `-inf` quality makes the mean `-inf` and the
/// standard error infinite.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run in the current rayon pool, keeping the per-iteration qualities.
pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let predictors = config.validate()?;
    let qualities: Vec<Vec<f64>> =
        (0..config.iterations as u64).into_par_iter().map(|i| evaluate_iteration(config, &predictors, i)).collect();
    let records = predictors
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let column: Vec<f64> = qualities.iter().map(|q| q[j]).collect();
            let (mean_quality, std_error) = mean_and_std_error(&column);
            ResultRecord {
                predictor_id: p.id.clone(),
                parameter: p.parameter,
                mean_quality,
                std_error,
                iterations: config.iterations as u64,
                seed: config.master_seed,
            }
        })
        .collect();
    Ok(ExperimentRun { records, qualities })
}

/// One averaged record per predictor entry, in config order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    Ok(run_experiment_detailed(config)?.records)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| run_experiment(config))
}
