//! Experiment definitions behind each figure.
//!
//! Figures 1–8 are parameter sweeps written as one CSV per panel; figure 9 is
//! the single-dataset e-value histogram. Reference predictors that do not
//! depend on the swept parameter (Bayes predictors, full CP/CEP, BICEP) are
//! emitted only at the first and last sweep point.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{Criterion, ExperimentConfig, PredictorEntry, PredictorKind, PriorSpec};
use crate::harness::{run_experiment, run_histogram_experiment, write_histogram, write_results};
use crate::model::ModelSpec;

pub const DEFAULT_SEED: u64 = 20_250_048;

/// Scale of the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `l = 1,200`, 1,000 iterations.
    #[default]
    Desk,
    /// `l = 12,000`, 10,000 iterations.
    Paper,
}

impl Profile {
    pub fn training_size(self) -> usize {
        match self {
            Self::Desk => 1_200,
            Self::Paper => 12_000,
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            Self::Desk => 1_000,
            Self::Paper => 10_000,
        }
    }
}

/// One CSV of a figure and the experiment that produces it.
#[derive(Debug, Clone)]
pub struct FigureJob {
    pub file_name: String,
    pub config: ExperimentConfig,
}

/// The `count` smallest divisors of `l` that are at least 2.
pub fn smallest_divisors(l: usize, count: usize) -> Vec<usize> {
    (2..=l).filter(|k| l.is_multiple_of(*k)).take(count).collect()
}

/// Proper sizes for an `m` sweep: 1, every `l/50`, and `l − 1`.
fn proper_size_grid(l: usize) -> Vec<usize> {
    let step = (l / 50).max(1);
    let mut grid = vec![1];
    grid.extend((step..l).step_by(step));
    grid.push(l - 1);
    grid.dedup();
    grid
}

fn entry(kind: PredictorKind) -> PredictorEntry {
    PredictorEntry::new(kind)
}

/// Reference predictors at both ends of a sweep.
fn at_ends(xs: &[f64], refs: &[PredictorEntry]) -> Vec<PredictorEntry> {
    let mut ends = vec![xs[0]];
    if xs.len() > 1 {
        ends.push(xs[xs.len() - 1]);
    }
    ends.iter().flat_map(|&x| refs.iter().map(move |r| r.clone().parameter(x))).collect()
}

fn job(
    name: String,
    profile: Profile,
    labels: usize,
    seed: u64,
    criterion: Criterion,
    predictors: Vec<PredictorEntry>,
) -> FigureJob {
    FigureJob {
        file_name: name,
        config: ExperimentConfig {
            model: ModelSpec::new(labels, ModelSpec::JEFFREYS).expect("valid model"),
            training_size: profile.training_size(),
            iterations: profile.iterations(),
            master_seed: seed,
            criterion,
            predictors,
        },
    }
}

fn cep(sigma: f64, suboptimal: bool) -> PredictorKind {
    PredictorKind::Cep { sigma, suboptimal }
}

fn fig1(profile: Profile, seed: u64) -> Vec<FigureJob> {
    let sigmas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    [10, 100]
        .into_iter()
        .map(|y| {
            let mut preds: Vec<_> = sigmas.iter().flat_map(|&s| [entry(cep(s, false)), entry(cep(s, true))]).collect();
            preds.extend(at_ends(
                &sigmas,
                &[
                    entry(PredictorKind::EBayes { suboptimal: false }),
                    entry(PredictorKind::EBayes { suboptimal: true }),
                ],
            ));
            job(format!("fig1_cep_sigma_y{y}.csv"), profile, y, seed, Criterion::Afes, preds)
        })
        .collect()
}

fn fig2(profile: Profile, seed: u64) -> Vec<FigureJob> {
    let l = profile.training_size();
    let grid = proper_size_grid(l);
    let xs: Vec<f64> = grid.iter().map(|&m| m as f64).collect();
    [2, 10, 100]
        .into_iter()
        .map(|y| {
            let mut preds: Vec<_> = grid
                .iter()
                .flat_map(|&m| {
                    let icp = entry(PredictorKind::Icp { proper_size: m });
                    [icp.clone(), icp.criterion(Criterion::AfsDeterministic)]
                })
                .collect();
            preds.extend(at_ends(
                &xs,
                &[
                    entry(PredictorKind::PBayes),
                    entry(PredictorKind::FullCp),
                    entry(PredictorKind::FullCp).criterion(Criterion::AfsDeterministic),
                ],
            ));
            job(format!("fig2_icp_y{y}.csv"), profile, y, seed, Criterion::AfsSmoothed, preds)
        })
        .collect()
}

fn fig3(profile: Profile, seed: u64) -> Vec<FigureJob> {
    let l = profile.training_size();
    let grid = proper_size_grid(l);
    let xs: Vec<f64> = grid.iter().map(|&m| m as f64).collect();
    [2, 10, 100]
        .into_iter()
        .map(|y| {
            let mut preds: Vec<_> = grid
                .iter()
                .flat_map(|&m| [false, true].map(|s| entry(PredictorKind::Icep { proper_size: m, suboptimal: s })))
                .collect();
            preds.extend(at_ends(
                &xs,
                &[
                    entry(PredictorKind::EBayes { suboptimal: false }),
                    entry(PredictorKind::EBayes { suboptimal: true }),
                    entry(cep(0.0, false)),
                    entry(cep(0.0, true)),
                ],
            ));
            job(format!("fig3_icep_y{y}.csv"), profile, y, seed, Criterion::Afes, preds)
        })
        .collect()
}

fn fig4(profile: Profile, seed: u64) -> Vec<FigureJob> {
    let l = profile.training_size();
    let ks: Vec<usize> = smallest_divisors(l, 12).into_iter().filter(|&k| k <= 24).collect();
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    [10, 100]
        .into_iter()
        .map(|y| {
            let mut preds: Vec<_> = ks.iter().map(|&k| entry(PredictorKind::Ccp { folds: k })).collect();
            preds.extend(at_ends(&xs, &[entry(PredictorKind::FullCp), entry(PredictorKind::PBayes)]));
            job(format!("fig4_ccp_y{y}.csv"), profile, y, seed, Criterion::AfsSmoothed, preds)
        })
        .collect()
}

/// ICEP with the proper/calibration sizes of a `K`-fold (or inverse) CCEP.
fn icep_for_folds(l: usize, k: usize, inverse: bool, suboptimal: bool) -> PredictorEntry {
    let proper_size = if inverse { l / k } else { l - l / k };
    entry(PredictorKind::Icep { proper_size, suboptimal }).parameter(k as f64)
}

fn fig5(profile: Profile, seed: u64) -> Vec<FigureJob> {
    let l = profile.training_size();
    [(10, 7, false), (100, 12, false), (2, 25, true)]
        .into_iter()
        .map(|(y, count, inverse)| {
            let ks = smallest_divisors(l, count);
            let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let mut preds: Vec<_> = ks
                .iter()
                .flat_map(|&k| {
                    [false, true].into_iter().flat_map(move |s| {
                        [
                            entry(PredictorKind::Ccep { folds: k, inverse, suboptimal: s }),
                            icep_for_folds(l, k, inverse, s),
                        ]
                    })
                })
                .collect();
            preds.extend(at_ends(&xs, &[entry(cep(0.0, false)), entry(PredictorKind::EBayes { suboptimal: false })]));
            let name = if inverse { format!("fig5_inverse_ccep_y{y}.csv") } else { format!("fig5_ccep_y{y}.csv") };
            job(name, profile, y, seed, Criterion::Afes, preds)
        })
        .collect()
}

/// RICEP, BICEP and semi-BICEP against CCEP over the `count` smallest divisors.
fn ricep_figure(profile: Profile, seed: u64, y: usize, count: usize, inverse: bool, name: String) -> FigureJob {
    let l = profile.training_size();
    let ks = smallest_divisors(l, count);
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let reps = [1, 10, 100];
    let mut preds = Vec::new();
    for &k in &ks {
        preds.push(entry(PredictorKind::Ccep { folds: k, inverse, suboptimal: false }));
        let proper_size = if inverse { l / k } else { l - l / k };
        for n in reps {
            preds.push(
                entry(PredictorKind::Ricep { proper_size, repetitions: n, suboptimal: false }).parameter(k as f64),
            );
        }
    }
    let bicep: Vec<_> = [PriorSpec::Uniform, PriorSpec::Semi]
        .into_iter()
        .flat_map(|prior| {
            reps.map(|n| entry(PredictorKind::Bicep { prior: prior.clone(), repetitions: n, suboptimal: false }))
        })
        .collect();
    preds.extend(at_ends(&xs, &bicep));
    job(name, profile, y, seed, Criterion::Afes, preds)
}

/// CSV jobs of sweep figures 1–8.
pub fn figure_jobs(figure: u8, profile: Profile, seed: u64) -> Result<Vec<FigureJob>> {
    let seed = seed.wrapping_add(figure as u64);
    Ok(match figure {
        1 => fig1(profile, seed),
        2 => fig2(profile, seed),
        3 => fig3(profile, seed),
        4 => fig4(profile, seed),
        5 => fig5(profile, seed),
        6 => vec![ricep_figure(profile, seed, 10, 7, false, "fig6_ricep_y10.csv".into())],
        7 => vec![ricep_figure(profile, seed, 100, 12, false, "fig7_ricep_y100.csv".into())],
        8 => vec![ricep_figure(profile, seed, 2, 25, true, "fig8_ricep_y2.csv".into())],
        other => return Err(Error::InvalidArgument(format!("no sweep figure {other}; expected 1-8"))),
    })
}

/// Proper size of the histogram experiment: two thirds of the training set.
pub fn histogram_proper_size(profile: Profile) -> usize {
    profile.training_size() * 2 / 3
}

/// Run figure `figure` (1–9) and write its CSVs into `out_dir`.
pub fn write_figure(figure: u8, profile: Profile, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.to_path_buf(), source })?;
    if figure == 9 {
        let l = profile.training_size();
        let outcome = run_histogram_experiment(l, 10, ModelSpec::JEFFREYS, histogram_proper_size(profile), 1000, seed)?;
        let path = out_dir.join("fig9_histogram.csv");
        write_histogram(&outcome, &path)?;
        return Ok(vec![path]);
    }
    figure_jobs(figure, profile, seed)?
        .into_iter()
        .map(|job| {
            let path = out_dir.join(&job.file_name);
            write_results(&run_experiment(&job.config)?, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisors() {
        assert_eq!(smallest_divisors(12_000, 12), vec![2, 3, 4, 5, 6, 8, 10, 12, 15, 16, 20, 24]);
        assert_eq!(smallest_divisors(12_000, 25).len(), 25);
        assert_eq!(smallest_divisors(1_200, 7), vec![2, 3, 4, 5, 6, 8, 10]);
    }

    #[test]
    fn every_job_validates() {
        for profile in [Profile::Desk, Profile::Paper] {
            for fig in 1..=8 {
                for job in figure_jobs(fig, profile, DEFAULT_SEED).unwrap() {
                    job.config.validate().unwrap_or_else(|e| panic!("{}: {e}", job.file_name));
                }
            }
        }
        assert!(figure_jobs(9, Profile::Desk, 0).is_err());
    }

    #[test]
    fn grid_covers_extremes() {
        let g = proper_size_grid(1_200);
        assert_eq!((g[0], *g.last().unwrap()), (1, 1_199));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
