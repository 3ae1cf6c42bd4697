//! End-to-end estimation: joint distribution, Kendall curve, generator and
//! Kendall's tau for a dataset, optionally conditioned on covariates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::ExportError;
use crate::families::FamilyError;
use crate::io::{CovariateKind, Dataset, IoError};
use crate::joint::{
    joint_cdf_conditional_with, joint_cdf_nonparam_with, CovariateCondition, DiscreteBivariateCDF, JointError,
    JointOptions, MarginalModels, WeightPolicy,
};
use crate::kendall::{
    generator_from_kendall, kendall_from_joint, kendall_tau_checked, GeneratorCurve, KendallCurve, KendallError,
    DEFAULT_EPSILON, DEFAULT_GRID, DEFAULT_NU0,
};
use crate::margins::{fit_censored_weibull, FittedMarginal, LinearPredictorSpec, MarginError};
use crate::sampler::SamplerError;
use crate::selector::SelectorError;
use crate::synth::SynthError;
use crate::survival::{cv_bandwidth_with, default_bandwidth_grid, CensoredRecord, Coord, Kernel, SurvivalError};

/// Largest tolerated `ν − K(ν)` on an empirical curve before warning.
const LAMBDA_WARN: f64 = 0.02;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error(transparent)]
    Margin(#[from] MarginError),
    #[error(transparent)]
    Joint(#[from] JointError),
    #[error(transparent)]
    Kendall(#[from] KendallError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("invalid condition: {0}")]
    Condition(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// Numerical failures, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::Margin(MarginError::Diverged { .. })
                | PipelineError::Kendall(KendallError::NonMonotone { .. })
                | PipelineError::Sampler(_)
                | PipelineError::Selector(SelectorError::Sampler(_) | SelectorError::GridMismatch(_))
                | PipelineError::Synth(SynthError::Sampler(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nonparam,
    Param,
}

impl FromStr for Mode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nonparam" | "nonparametric" => Ok(Mode::Nonparam),
            "param" | "parametric" => Ok(Mode::Param),
            _ => Err(PipelineError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nonparam => "nonparam",
            Mode::Param => "param",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionOp {
    Eq,
    AtMost,
    Above,
}

/// `NAME=VALUE`, `NAME<=VALUE` or `NAME>VALUE`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub op: ConditionOp,
    pub value: String,
}

impl FromStr for Condition {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, op, value) = if let Some((n, v)) = s.split_once("<=") {
            (n, ConditionOp::AtMost, v)
        } else if let Some((n, v)) = s.split_once('>') {
            (n, ConditionOp::Above, v)
        } else if let Some((n, v)) = s.split_once('=') {
            (n, ConditionOp::Eq, v)
        } else {
            return Err(PipelineError::Condition(format!("{s:?} is not NAME=VALUE, NAME<=VALUE or NAME>VALUE")));
        };
        let (name, value) = (name.trim(), value.trim());
        if name.is_empty() || value.is_empty() {
            return Err(PipelineError::Condition(format!("{s:?} has an empty side")));
        }
        Ok(Condition { name: name.into(), op, value: value.into() })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            ConditionOp::Eq => "=",
            ConditionOp::AtMost => "<=",
            ConditionOp::Above => ">",
        };
        write!(f, "{}{}{}", self.name, op, self.value)
    }
}

impl Condition {
    pub fn resolve(&self, dataset: &Dataset) -> Result<CovariateCondition, PipelineError> {
        let index = dataset
            .covariate_index(&self.name)
            .ok_or_else(|| PipelineError::Condition(format!("unknown covariate {:?}", self.name)))?;
        let numeric = || {
            self.value
                .parse::<f64>()
                .map_err(|_| PipelineError::Condition(format!("{:?} is not a number", self.value)))
        };
        match (&dataset.covariate_kinds[index], self.op) {
            (CovariateKind::Categorical { .. }, ConditionOp::Eq) => {
                let value = dataset.level_code(index, &self.value).ok_or_else(|| {
                    PipelineError::Joint(JointError::EmptyStratum(format!("{} has no level {:?}", self.name, self.value)))
                })?;
                Ok(CovariateCondition::Level { index, value })
            }
            (CovariateKind::Categorical { .. }, _) => {
                Err(PipelineError::Condition(format!("{}: thresholds need a continuous covariate", self.name)))
            }
            (CovariateKind::Continuous, ConditionOp::Eq) => Ok(CovariateCondition::Pin { index, value: numeric()? }),
            (CovariateKind::Continuous, ConditionOp::AtMost) => {
                Ok(CovariateCondition::AtMost { index, value: numeric()? })
            }
            (CovariateKind::Continuous, ConditionOp::Above) => Ok(CovariateCondition::Above { index, value: numeric()? }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    CrossValidated,
    Fixed { h1: f64, h2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub nu0: f64,
    pub epsilon: f64,
    pub grid_size: usize,
    pub bandwidth: BandwidthChoice,
    /// Constant mixing weight `w`.
    pub weight: f64,
    /// Parametric mode: include the dataset's covariates in the regressions.
    pub use_covariates: bool,
    pub max_axis: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            nu0: DEFAULT_NU0,
            epsilon: DEFAULT_EPSILON,
            grid_size: DEFAULT_GRID,
            bandwidth: BandwidthChoice::CrossValidated,
            weight: 0.5,
            use_covariates: true,
            max_axis: JointOptions::default().max_axis,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_records: usize,
    /// Records matching the conditioning (all records without one).
    pub stratum_size: usize,
    pub total_mass: f64,
    pub clipped_masses: usize,
    pub isotonic_applied: bool,
    pub tau_clipped: bool,
    pub generator_clips: usize,
    pub max_lambda: f64,
    pub bandwidths: Option<(f64, f64)>,
    pub dropped_covariates: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub mode: Mode,
    pub conditions: Vec<String>,
    pub tau: f64,
    pub kendall: KendallCurve,
    pub generator: GeneratorCurve,
    pub diagnostics: Diagnostics,
    pub models: Option<MarginalModels>,
    #[serde(skip)]
    pub joint: Option<DiscreteBivariateCDF>,
}

/// Indices of covariates that vary among records where `keep` holds.
fn varying(records: &[&CensoredRecord], candidates: &[usize]) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&i| records.first().is_some_and(|r0| records.iter().any(|r| r.z[i] != r0.z[i])))
        .collect()
}

fn fit_one(
    records: &[CensoredRecord],
    response: Coord,
    with_partner: bool,
    covariates: &[usize],
    dropped: &mut Vec<usize>,
) -> Result<FittedMarginal, MarginError> {
    let partner = response.other();
    let subset: Vec<&CensoredRecord> =
        records.iter().filter(|r| !with_partner || r.observed(partner)).collect();
    let uncensored: Vec<&CensoredRecord> = subset.iter().copied().filter(|r| r.observed(response)).collect();
    let kept = varying(&uncensored, covariates);
    dropped.extend(covariates.iter().filter(|i| !kept.contains(i)));
    let y: Vec<f64> = subset.iter().map(|r| r.time(response)).collect();
    let d: Vec<bool> = subset.iter().map(|r| r.observed(response)).collect();
    let z: Vec<Vec<f64>> = subset.iter().map(|r| r.z.clone()).collect();
    let t: Vec<f64> = subset.iter().map(|r| r.time(partner)).collect();
    let spec = LinearPredictorSpec::with_covariates(kept, with_partner);
    fit_censored_weibull(&y, &d, &z, with_partner.then_some(t.as_slice()), &spec, &spec)
}

/// The four regressions: scale and shape both linear in the covariates,
/// plus the partner's time for the two conditional models (fitted on records
/// where the partner is uncensored). Covariates constant on a model's
/// uncensored subset are left out of that model.
pub fn fit_marginal_models(
    records: &[CensoredRecord],
    covariates: &[usize],
) -> Result<(MarginalModels, Vec<usize>), MarginError> {
    let mut dropped = Vec::new();
    let models = MarginalModels {
        model_1_given_2: fit_one(records, Coord::First, true, covariates, &mut dropped)?,
        model_2_given_1: fit_one(records, Coord::Second, true, covariates, &mut dropped)?,
        marginal_1: fit_one(records, Coord::First, false, covariates, &mut dropped)?,
        marginal_2: fit_one(records, Coord::Second, false, covariates, &mut dropped)?,
    };
    dropped.sort_unstable();
    dropped.dedup();
    Ok((models, dropped))
}

/// Cross-validated (or fixed) bandwidths `(h1, h2)`.
pub fn choose_bandwidths(records: &[CensoredRecord], choice: BandwidthChoice) -> Result<(f64, f64), PipelineError> {
    match choice {
        BandwidthChoice::Fixed { h1, h2 } => Ok((h1, h2)),
        BandwidthChoice::CrossValidated => {
            let h1 = cv_bandwidth_with(records, Coord::First, &default_bandwidth_grid(records, Coord::First), Kernel::Epanechnikov)?;
            let h2 = cv_bandwidth_with(records, Coord::Second, &default_bandwidth_grid(records, Coord::Second), Kernel::Epanechnikov)?;
            Ok((h1, h2))
        }
    }
}

pub fn run_pipeline(
    dataset: &Dataset,
    mode: Mode,
    conditions: &[Condition],
    options: &PipelineOptions,
) -> Result<PipelineResult, PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::Joint(JointError::DegenerateSample("empty dataset".into())));
    }
    let weights = WeightPolicy::constant(options.weight)?;
    let joint_opts = JointOptions { max_axis: options.max_axis, ..JointOptions::default() };
    let resolved: Vec<CovariateCondition> = conditions.iter().map(|c| c.resolve(dataset)).collect::<Result<_, _>>()?;
    let stratum: Vec<CensoredRecord> = dataset
        .records
        .iter()
        .filter(|r| resolved.iter().all(|c| c.keeps(&r.z)))
        .cloned()
        .collect();
    let mut diag = Diagnostics { n_records: dataset.len(), stratum_size: stratum.len(), ..Diagnostics::default() };
    if stratum.is_empty() {
        let desc = conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        return Err(PipelineError::Joint(JointError::EmptyStratum(desc)));
    }

    let (joint, models) = match mode {
        Mode::Nonparam => {
            if resolved.iter().any(|c| matches!(c, CovariateCondition::Pin { .. })) {
                return Err(PipelineError::Condition(
                    "pinning a continuous covariate needs the parametric mode".into(),
                ));
            }
            let (h1, h2) = choose_bandwidths(&stratum, options.bandwidth)?;
            diag.bandwidths = Some((h1, h2));
            (joint_cdf_nonparam_with(&stratum, h1, h2, &weights, &joint_opts)?, None)
        }
        Mode::Param => {
            if dataset.records.iter().any(|r| r.y1 <= 0.0 || r.y2 <= 0.0) {
                return Err(PipelineError::Config("parametric mode needs strictly positive times".into()));
            }
            let covs: Vec<usize> = if options.use_covariates { (0..dataset.n_covariates()).collect() } else { Vec::new() };
            let (models, dropped) = fit_marginal_models(&dataset.records, &covs)?;
            diag.dropped_covariates = dropped.iter().map(|&i| dataset.covariate_names[i].clone()).collect();
            let joint = joint_cdf_conditional_with(&models, &dataset.records, &resolved, &weights, &joint_opts)?;
            (joint, Some(models))
        }
    };
    diag.total_mass = joint.total_mass;
    diag.clipped_masses = joint.clipped_masses;

    let kendall = kendall_from_joint(&joint, options.grid_size)?;
    let tau = kendall_tau_checked(&kendall);
    let generator = generator_from_kendall(&kendall, options.nu0, options.epsilon)?;
    diag.isotonic_applied = kendall.isotonic_applied;
    diag.tau_clipped = tau.clipped;
    diag.generator_clips = generator.clip_count;
    diag.max_lambda = kendall.max_lambda();
    if diag.max_lambda > LAMBDA_WARN {
        diag.warnings.push(format!(
            "K(nu) falls {:.3} below nu somewhere; an Archimedean model fits poorly",
            diag.max_lambda
        ));
    }
    if tau.clipped {
        diag.warnings.push("tau was clipped to [-1, 1]".into());
    }
    if !diag.dropped_covariates.is_empty() {
        diag.warnings.push(format!("constant covariates left out: {}", diag.dropped_covariates.join(", ")));
    }
    Ok(PipelineResult {
        mode,
        conditions: conditions.iter().map(|c| c.to_string()).collect(),
        tau: tau.tau,
        kendall,
        generator,
        diagnostics: diag,
        models,
        joint: Some(joint),
    })
}
