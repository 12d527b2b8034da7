//! Experiment configuration, as read from JSON.

use serde::{Deserialize, Serialize};

use crate::aggregation::{CalibSizePrior, RicepPlan};
use crate::conformal_full::{OrdinarinessSigma, ScoreVariant};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Efficiency criterion, in its infinite-test-set form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Average false p-surprisal with `τ` integrated out.
    AfsSmoothed,
    /// Average false p-surprisal of the deterministic (`τ = 1`) p-values.
    AfsDeterministic,
    /// Average false e-surprisal.
    Afes,
    /// Mean e-surprisal over all labels.
    Afes16,
}

impl Criterion {
    pub fn scores_p_values(self) -> bool {
        matches!(self, Self::AfsSmoothed | Self::AfsDeterministic)
    }
}

/// Calibration-size prior of a BICEP predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Uniform over `{1, …, l − 1}` (BICEP).
    Uniform,
    /// Uniform over `{1, …, ⌊l/2⌋}` (semi-BICEP).
    Semi,
    Point {
        calib_size: usize,
    },
    /// `weights[i]` is the probability of calibration size `i + 1` (partial BICEP).
    Weights {
        weights: Vec<f64>,
    },
}

impl PriorSpec {
    pub fn build(&self, training_size: usize) -> Result<CalibSizePrior> {
        let prior = match self {
            Self::Uniform => CalibSizePrior::uniform(training_size),
            Self::Semi => CalibSizePrior::semi(training_size),
            Self::Point { calib_size } => CalibSizePrior::point(training_size, *calib_size),
            Self::Weights { weights } => CalibSizePrior::from_weights(weights.clone()),
        }?;
        if !prior.fits(training_size) {
            return Err(crate::error::invalid(format!(
                "prior puts mass on calibration size {} >= l = {training_size}",
                prior.max_size()
            )));
        }
        Ok(prior)
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "BICEP",
            Self::Semi => "semi-BICEP",
            Self::Point { .. } | Self::Weights { .. } => "partial BICEP",
        }
    }
}

/// A predictor and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorKind {
    PBayes,
    EBayes {
        #[serde(default)]
        suboptimal: bool,
    },
    FullCp,
    Cep {
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        suboptimal: bool,
    },
    Icp {
        proper_size: usize,
    },
    Icep {
        proper_size: usize,
        #[serde(default)]
        suboptimal: bool,
    },
    Ccp {
        folds: usize,
    },
    Ccep {
        folds: usize,
        #[serde(default)]
        inverse: bool,
        #[serde(default)]
        suboptimal: bool,
    },
    Ricep {
        proper_size: usize,
        repetitions: usize,
        #[serde(default)]
        suboptimal: bool,
    },
    Bicep {
        prior: PriorSpec,
        repetitions: usize,
        #[serde(default)]
        suboptimal: bool,
    },
}

impl PredictorKind {
    pub fn outputs_p_values(&self) -> bool {
        matches!(self, Self::PBayes | Self::FullCp | Self::Icp { .. } | Self::Ccp { .. })
    }

    /// Whether evaluation needs individual observations rather than counts.
    pub fn needs_dataset(&self) -> bool {
        matches!(
            self,
            Self::Icp { .. }
                | Self::Icep { .. }
                | Self::Ccp { .. }
                | Self::Ccep { .. }
                | Self::Ricep { .. }
                | Self::Bicep { .. }
        )
    }

    fn suboptimal_prefix(suboptimal: bool) -> &'static str {
        if suboptimal {
            "suboptimal "
        } else {
            ""
        }
    }

    /// Legend-style name, e.g. `RICEP 10` or `suboptimal CEP`.
    pub fn default_id(&self) -> String {
        let pre = Self::suboptimal_prefix;
        match self {
            Self::PBayes => "p-Bayes".into(),
            Self::EBayes { suboptimal } => format!("{}e-Bayes", pre(*suboptimal)),
            Self::FullCp => "CP".into(),
            Self::Cep { suboptimal, .. } => format!("{}CEP", pre(*suboptimal)),
            Self::Icp { .. } => "ICP".into(),
            Self::Icep { suboptimal, .. } => format!("{}ICEP", pre(*suboptimal)),
            Self::Ccp { .. } => "CCP".into(),
            Self::Ccep { inverse, suboptimal, .. } => {
                format!("{}{}CCEP", pre(*suboptimal), if *inverse { "inverse " } else { "" })
            }
            Self::Ricep { repetitions, suboptimal, .. } => format!("{}RICEP {repetitions}", pre(*suboptimal)),
            Self::Bicep { prior, repetitions, suboptimal } => {
                format!("{}{} {repetitions}", pre(*suboptimal), prior.name())
            }
        }
    }

    /// The natural x-axis value: σ, proper size, number of folds, or repetitions.
    pub fn default_parameter(&self) -> f64 {
        match self {
            Self::PBayes | Self::EBayes { .. } | Self::FullCp => 0.0,
            Self::Cep { sigma, .. } => *sigma,
            Self::Icp { proper_size } | Self::Icep { proper_size, .. } | Self::Ricep { proper_size, .. } => {
                *proper_size as f64
            }
            Self::Ccp { folds } | Self::Ccep { folds, .. } => *folds as f64,
            Self::Bicep { repetitions, .. } => *repetitions as f64,
        }
    }
}

/// One predictor of an experiment, with optional overrides of its CSV
/// identity and of the experiment-wide criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorEntry {
    pub predictor: PredictorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Criterion>,
}

impl PredictorEntry {
    pub fn new(predictor: PredictorKind) -> Self {
        Self { predictor, label: None, parameter: None, criterion: None }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn parameter(mut self, value: f64) -> Self {
        self.parameter = Some(value);
        self
    }

    pub fn criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = Some(criterion);
        self
    }

    pub fn id(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.predictor.default_id())
    }

    pub fn parameter_value(&self) -> f64 {
        self.parameter.unwrap_or_else(|| self.predictor.default_parameter())
    }
}

/// Everything needed to reproduce one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub training_size: usize,
    pub iterations: usize,
    pub master_seed: u64,
    pub criterion: Criterion,
    pub predictors: Vec<PredictorEntry>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every invariant and build the runnable predictors.
    pub fn validate(&self) -> Result<Vec<CompiledPredictor>> {
        let bad = |msg: String| Error::InvalidConfig(msg);
        if self.training_size < 2 {
            return Err(bad(format!("training_size must be at least 2, got {}", self.training_size)));
        }
        if self.iterations == 0 {
            return Err(bad("iterations must be at least 1".into()));
        }
        if self.predictors.is_empty() {
            return Err(bad("no predictors".into()));
        }
        self.predictors
            .iter()
            .enumerate()
            .map(|(j, entry)| {
                compile(entry, self.training_size, self.criterion)
                    .map_err(|e| bad(format!("predictor #{j} ({}): {e}", entry.id())))
            })
            .collect()
    }
}

/// A validated predictor ready to be evaluated.
#[derive(Debug, Clone)]
pub struct CompiledPredictor {
    pub id: String,
    pub parameter: f64,
    pub criterion: Criterion,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub enum Method {
    PBayes,
    EBayes(ScoreVariant),
    FullCp,
    Cep(OrdinarinessSigma, ScoreVariant),
    Icp(usize),
    Icep(usize, ScoreVariant),
    Ccp(usize),
    Ccep { folds: usize, inverse: bool, variant: ScoreVariant },
    Ricep(RicepPlan, ScoreVariant),
    Bicep { prior: CalibSizePrior, repetitions: usize, variant: ScoreVariant },
}

impl Method {
    pub fn needs_dataset(&self) -> bool {
        !matches!(self, Self::PBayes | Self::EBayes(_) | Self::FullCp | Self::Cep(..))
    }
}

fn check_proper(l: usize, m: usize) -> Result<()> {
    if m == 0 || m >= l {
        return Err(crate::error::invalid(format!("proper_size {m} outside 1..={}", l - 1)));
    }
    Ok(())
}

fn check_folds(l: usize, k: usize) -> Result<()> {
    if k < 2 || !l.is_multiple_of(k) {
        return Err(crate::error::invalid(format!("folds {k} must be >= 2 and divide l = {l}")));
    }
    Ok(())
}

fn compile(entry: &PredictorEntry, l: usize, default: Criterion) -> Result<CompiledPredictor> {
    let criterion = entry.criterion.unwrap_or(default);
    let p = entry.predictor.outputs_p_values();
    if p != criterion.scores_p_values() {
        return Err(crate::error::invalid(format!(
            "a {} predictor cannot be scored by {criterion:?}",
            if p { "p-value" } else { "e-value" }
        )));
    }
    use PredictorKind as K;
    let v = ScoreVariant::from_flag;
    let method = match &entry.predictor {
        K::PBayes => Method::PBayes,
        K::EBayes { suboptimal } => Method::EBayes(v(*suboptimal)),
        K::FullCp => Method::FullCp,
        K::Cep { sigma, suboptimal } => Method::Cep(OrdinarinessSigma::new(*sigma)?, v(*suboptimal)),
        K::Icp { proper_size } => {
            check_proper(l, *proper_size)?;
            Method::Icp(*proper_size)
        }
        K::Icep { proper_size, suboptimal } => {
            check_proper(l, *proper_size)?;
            Method::Icep(*proper_size, v(*suboptimal))
        }
        K::Ccp { folds } => {
            check_folds(l, *folds)?;
            Method::Ccp(*folds)
        }
        K::Ccep { folds, inverse, suboptimal } => {
            check_folds(l, *folds)?;
            Method::Ccep { folds: *folds, inverse: *inverse, variant: v(*suboptimal) }
        }
        K::Ricep { proper_size, repetitions, suboptimal } => {
            Method::Ricep(RicepPlan::new(l, *proper_size, *repetitions)?, v(*suboptimal))
        }
        K::Bicep { prior, repetitions, suboptimal } => {
            if *repetitions == 0 {
                return Err(crate::error::invalid("repetitions must be at least 1"));
            }
            Method::Bicep { prior: prior.build(l)?, repetitions: *repetitions, variant: v(*suboptimal) }
        }
    };
    let mut id = entry.id();
    if entry.label.is_none() && criterion == Criterion::AfsDeterministic {
        id.push_str(" deterministic");
    }
    Ok(CompiledPredictor { id, parameter: entry.parameter_value(), criterion, method })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "model": {"num_labels": 10, "alpha": 0.5},
        "training_size": 120,
        "iterations": 5,
        "master_seed": 42,
        "criterion": "afes",
        "predictors": [
            {"predictor": {"kind": "cep", "sigma": 0.5}},
            {"predictor": {"kind": "ccep", "folds": 4, "inverse": true}},
            {"predictor": {"kind": "bicep", "prior": {"type": "semi"}, "repetitions": 10}},
            {"predictor": {"kind": "icp", "proper_size": 60}, "criterion": "afs_deterministic"}
        ]
    }"#;

    #[test]
    fn parses_and_compiles() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        let compiled = cfg.validate().unwrap();
        let ids: Vec<_> = compiled.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["CEP", "inverse CCEP", "semi-BICEP 10", "ICP deterministic"]);
        assert_eq!(compiled[1].parameter, 4.0);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let extra_top = SAMPLE.replace("\"iterations\": 5,", "\"iterations\": 5, \"threads\": 2,");
        assert!(ExperimentConfig::from_json(&extra_top).is_err());
        let extra_pred = SAMPLE.replace("\"sigma\": 0.5", "\"sigma\": 0.5, \"gamma\": 1");
        assert!(ExperimentConfig::from_json(&extra_pred).is_err());
        let extra_model = SAMPLE.replace("\"alpha\": 0.5", "\"alpha\": 0.5, \"beta\": 1");
        assert!(ExperimentConfig::from_json(&extra_model).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        for (from, to) in [
            ("\"folds\": 4", "\"folds\": 7"),
            ("\"sigma\": 0.5", "\"sigma\": 1.5"),
            ("\"proper_size\": 60", "\"proper_size\": 120"),
            ("\"repetitions\": 10", "\"repetitions\": 0"),
            ("\"iterations\": 5", "\"iterations\": 0"),
            ("\"criterion\": \"afs_deterministic\"", "\"criterion\": \"afes\""),
        ] {
            let cfg = ExperimentConfig::from_json(&SAMPLE.replace(from, to)).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{to}");
        }
        assert!(ExperimentConfig::from_json(&SAMPLE.replace("\"num_labels\": 10", "\"num_labels\": 1")).is_err());
    }
}
