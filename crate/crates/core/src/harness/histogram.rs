//! Spread of single-split ICEP e-values for the least likely label.
//!
//! One θ and one training set are drawn; the set is then split many times
//! with a fixed proper size, and the e-value of the label with the smallest
//! θ component is recorded for each split.

use std::path::Path;

use crate::aggregation::{ricep_split_e_values, RicepPlan};
use crate::conformal_full::ScoreVariant;
use crate::error::Result;
use crate::harness::{mean_and_std_error, write_results, ResultRecord};
use crate::model::{sample_counts, sample_theta, Dataset, ModelSpec, Theta};
use crate::rng::{child_rng, DATA_STREAM};

#[derive(Debug, Clone)]
pub struct HistogramOutcome {
    pub theta: Theta,
    /// 0-based label with the smallest θ component.
    pub target_label: usize,
    pub e_values: Vec<f64>,
    pub mean_e: f64,
    pub seed: u64,
}

pub fn run_histogram_experiment(
    training_size: usize,
    num_labels: usize,
    alpha: f64,
    proper_size: usize,
    num_splits: usize,
    seed: u64,
) -> Result<HistogramOutcome> {
    let spec = ModelSpec::new(num_labels, alpha)?;
    let plan = RicepPlan::new(training_size, proper_size, num_splits)?;
    let mut rng = child_rng(seed, 0, DATA_STREAM);
    let theta = sample_theta(&spec, &mut rng);
    let data = Dataset::from_counts(&sample_counts(&theta, training_size, &mut rng));
    let target_label = theta.least_likely();
    let mut split_rng = child_rng(seed, 0, 1);
    let e_values: Vec<f64> = ricep_split_e_values(&data, &plan, &spec, ScoreVariant::Optimal, &mut split_rng)
        .iter()
        .map(|e| e.values()[target_label])
        .collect();
    let mean_e = e_values.iter().sum::<f64>() / e_values.len() as f64;
    Ok(HistogramOutcome { theta, target_label, e_values, mean_e, seed })
}

/// One `e-value` row per split (parameter = 1-based split index), then a
/// `mean e-value` summary row and a `theta min` row, both with the 1-based
/// target label as parameter.
pub fn write_histogram(outcome: &HistogramOutcome, path: &Path) -> Result<()> {
    let label = (outcome.target_label + 1) as f64;
    let n = outcome.e_values.len() as u64;
    let mut rows: Vec<ResultRecord> = outcome
        .e_values
        .iter()
        .enumerate()
        .map(|(i, &e)| ResultRecord {
            predictor_id: "e-value".into(),
            parameter: (i + 1) as f64,
            mean_quality: e,
            std_error: 0.0,
            iterations: 1,
            seed: outcome.seed,
        })
        .collect();
    let (_, se) = mean_and_std_error(&outcome.e_values);
    rows.push(ResultRecord {
        predictor_id: "mean e-value".into(),
        parameter: label,
        mean_quality: outcome.mean_e,
        std_error: se,
        iterations: n,
        seed: outcome.seed,
    });
    rows.push(ResultRecord {
        predictor_id: "theta min".into(),
        parameter: label,
        mean_quality: outcome.theta.probs()[outcome.target_label],
        std_error: 0.0,
        iterations: 1,
        seed: outcome.seed,
    });
    write_results(&rows, path)
}
