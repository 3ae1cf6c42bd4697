//! Synthetic censored bivariate data with Weibull margins linked to
//! covariates and an Archimedean dependence structure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{Family, FamilyError, FamilyFit};
use crate::io::{CovariateKind, Dataset};
use crate::margins::LifetimeFamily;
use crate::numeric::brent;
use crate::rng::{open01, stream, RngStream};
use crate::sampler::{sample_family, SamplerError};
use crate::survival::CensoredRecord;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    ConfigError(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Copula given by family and either `alpha` or a target `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: Family,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

impl CopulaSpec {
    pub fn fit(&self) -> Result<FamilyFit, SynthError> {
        match (self.alpha, self.tau) {
            (Some(a), _) => Ok(FamilyFit::from_alpha(self.family, a)?),
            (None, Some(t)) => Ok(FamilyFit::from_tau(self.family, t)?),
            (None, None) => Err(SynthError::ConfigError("copula needs alpha or tau".into())),
        }
    }
}

/// Weibull margin: `scale = exp(β·[1, z])`, `shape = exp(γ·[1, z])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub scale_coeffs: Vec<f64>,
    pub shape_coeffs: Vec<f64>,
}

impl MarginSpec {
    fn params(&self, z: &[f64]) -> (f64, f64) {
        let lin = |c: &[f64]| c[0] + c[1..].iter().zip(z).map(|(b, x)| b * x).sum::<f64>();
        (lin(&self.scale_coeffs).exp(), lin(&self.shape_coeffs).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Levels drawn with the given probabilities; encoded by lexicographic rank.
    Categorical { levels: Vec<String>, probs: Vec<f64> },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(flatten)]
    pub law: CovariateLaw,
}

/// Distribution of the common censoring time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CensoringLaw {
    None,
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    /// Exponential with its rate set so that the expected censored fraction,
    /// averaged over both coordinates of the drawn latent times, is `fraction`.
    TargetFraction { fraction: f64 },
}

/// Per-level copulas for one categorical covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaByLevel {
    pub covariate: String,
    /// One copula per level, in the order of the covariate's `levels`.
    pub copulas: Vec<CopulaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub copula: CopulaSpec,
    #[serde(default)]
    pub copula_by_level: Option<CopulaByLevel>,
    pub margins: [MarginSpec; 2],
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    pub censoring: CensoringLaw,
    pub seed: u64,
}

impl SynthConfig {
    /// Clayton at `tau`, intercept-only Weibull margins, no covariates.
    pub fn simple(n: usize, family: Family, tau: f64, censoring: CensoringLaw, seed: u64) -> Self {
        Self {
            n,
            copula: CopulaSpec { family, alpha: None, tau: Some(tau) },
            copula_by_level: None,
            margins: [
                MarginSpec { scale_coeffs: vec![1.0], shape_coeffs: vec![0.3] },
                MarginSpec { scale_coeffs: vec![0.8], shape_coeffs: vec![0.1] },
            ],
            covariates: Vec::new(),
            censoring,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::ConfigError(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        let p = self.covariates.len();
        for (j, m) in self.margins.iter().enumerate() {
            if m.scale_coeffs.len() != p + 1 || m.shape_coeffs.len() != p + 1 {
                return bad(format!("margin {} needs {} coefficients per parameter", j + 1, p + 1));
            }
        }
        for c in &self.covariates {
            match &c.law {
                CovariateLaw::Categorical { levels, probs } => {
                    if levels.is_empty() || levels.len() != probs.len() {
                        return bad(format!("{}: levels and probabilities differ in length", c.name));
                    }
                    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return bad(format!("{}: probabilities must be nonnegative and sum to 1", c.name));
                    }
                }
                CovariateLaw::Uniform { low, high } => {
                    if !(low < high) {
                        return bad(format!("{}: uniform range is empty", c.name));
                    }
                }
            }
        }
        match self.censoring {
            CensoringLaw::Exponential { rate } if !(rate > 0.0) => return bad("censoring rate must be positive".into()),
            CensoringLaw::Uniform { low, high } if !(low >= 0.0 && low < high) => {
                return bad("censoring range must satisfy 0 <= low < high".into())
            }
            CensoringLaw::TargetFraction { fraction } if !(fraction > 0.0 && fraction < 1.0) => {
                return bad("censoring fraction must lie in (0, 1)".into())
            }
            _ => {}
        }
        if let Some(by) = &self.copula_by_level {
            let Some(c) = self.covariates.iter().find(|c| c.name == by.covariate) else {
                return bad(format!("unknown covariate {:?}", by.covariate));
            };
            match &c.law {
                CovariateLaw::Categorical { levels, .. } if levels.len() == by.copulas.len() => {}
                _ => return bad("copula_by_level needs one copula per level of a categorical covariate".into()),
            }
        }
        self.copula.fit()?;
        Ok(())
    }
}

/// Generated dataset and the latent (uncensored) times behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub latent: Vec<(f64, f64)>,
    pub copula_draws: Vec<(f64, f64)>,
}

pub fn synth_generate(config: &SynthConfig) -> Result<Dataset, SynthError> {
    Ok(synth_generate_full(config)?.dataset)
}

pub fn synth_generate_full(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let mut rng: RngStream = stream(config.seed, 0);
    let n = config.n;

    // covariates, categorical ones encoded by lexicographic rank
    let mut kinds = Vec::new();
    let mut codes: Vec<Vec<f64>> = Vec::new();
    let mut draw_index: Vec<Vec<usize>> = Vec::new();
    for c in &config.covariates {
        match &c.law {
            CovariateLaw::Categorical { levels, probs } => {
                let mut sorted = levels.clone();
                sorted.sort();
                let rank: Vec<f64> =
                    levels.iter().map(|l| sorted.iter().position(|s| s == l).unwrap() as f64).collect();
                let mut col = Vec::with_capacity(n);
                let mut idx = Vec::with_capacity(n);
                for _ in 0..n {
                    let u = open01(&mut rng);
                    let mut acc = 0.0;
                    let mut k = probs.len() - 1;
                    for (j, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            k = j;
                            break;
                        }
                    }
                    col.push(rank[k]);
                    idx.push(k);
                }
                kinds.push(CovariateKind::Categorical { levels: sorted });
                codes.push(col);
                draw_index.push(idx);
            }
            CovariateLaw::Uniform { low, high } => {
                codes.push((0..n).map(|_| low + (high - low) * open01(&mut rng)).collect());
                draw_index.push(Vec::new());
                kinds.push(CovariateKind::Continuous);
            }
        }
    }
    let z_of = |i: usize| -> Vec<f64> { codes.iter().map(|c| c[i]).collect() };

    // copula draws
    let base = config.copula.fit()?;
    let by_level: Option<(usize, Vec<FamilyFit>)> = match &config.copula_by_level {
        Some(by) => {
            let k = config.covariates.iter().position(|c| c.name == by.covariate).unwrap();
            Some((k, by.copulas.iter().map(|c| c.fit()).collect::<Result<_, _>>()?))
        }
        None => None,
    };
    let copula_draws: Vec<(f64, f64)> = match &by_level {
        None => sample_family(&base, n, &mut rng)?,
        Some((k, fits)) => (0..n)
            .map(|i| Ok(sample_family(&fits[draw_index[*k][i]], 1, &mut rng)?[0]))
            .collect::<Result<_, SynthError>>()?,
    };

    let latent: Vec<(f64, f64)> = copula_draws
        .iter()
        .enumerate()
        .map(|(i, &(u1, u2))| {
            let z = z_of(i);
            let (s1, k1) = config.margins[0].params(&z);
            let (s2, k2) = config.margins[1].params(&z);
            (LifetimeFamily::Weibull.quantile(u1, s1, k1), LifetimeFamily::Weibull.quantile(u2, s2, k2))
        })
        .collect();

    let censor_rate = match config.censoring {
        CensoringLaw::TargetFraction { fraction } => Some(calibrate_rate(&latent, fraction)?),
        CensoringLaw::Exponential { rate } => Some(rate),
        _ => None,
    };
    let records = latent
        .iter()
        .enumerate()
        .map(|(i, &(t1, t2))| {
            let c = match (config.censoring, censor_rate) {
                (_, Some(rate)) => -open01(&mut rng).ln() / rate,
                (CensoringLaw::Uniform { low, high }, _) => low + (high - low) * open01(&mut rng),
                _ => f64::INFINITY,
            };
            CensoredRecord::new(t1.min(c), t2.min(c), t1 <= c, t2 <= c, z_of(i))
        })
        .collect();

    Ok(SynthOutput {
        dataset: Dataset {
            records,
            covariate_names: config.covariates.iter().map(|c| c.name.clone()).collect(),
            covariate_kinds: kinds,
            source: "synthetic".into(),
        },
        latent,
        copula_draws,
    })
}

/// Exponential censoring rate with mean censored fraction `target`.
fn calibrate_rate(latent: &[(f64, f64)], target: f64) -> Result<f64, SynthError> {
    let m = 2.0 * latent.len() as f64;
    let frac = |rate: f64| latent.iter().map(|&(a, b)| -(-rate * a).exp_m1() - (-rate * b).exp_m1()).sum::<f64>() / m;
    let mut hi = 1.0;
    while frac(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(SynthError::ConfigError("cannot reach the censoring fraction".into()));
        }
    }
    brent(|r| frac(r) - target, 0.0, hi, 1e-12, 200)
        .ok_or_else(|| SynthError::ConfigError("censoring calibration failed".into()))
}
