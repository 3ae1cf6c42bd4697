//! Predicting response pairs by simulation: dependence from a copula family or
//! from a tabulated generator, pooled over all records or per stratum, pushed
//! through the fitted marginal regressions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::families::{Family, FamilyFit};
use crate::io::Dataset;
use crate::kendall::{GeneratorCurve, KendallCurve};
use crate::margins::{FittedMarginal, LifetimeFamily};
use crate::pipeline::{run_pipeline, Condition, Mode, PipelineError, PipelineOptions, PipelineResult};
use crate::rng::{stream, RngStream};
use crate::sampler::{sample_family, sample_from_generator};

#[derive(Debug, Clone, PartialEq)]
pub enum DependenceSource {
    Family(FamilyFit),
    Generator { generator: GeneratorCurve, kendall: KendallCurve },
}

impl DependenceSource {
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Vec<(f64, f64)>, PipelineError> {
        Ok(match self {
            DependenceSource::Family(fit) => sample_family(fit, n, rng)?,
            DependenceSource::Generator { generator, kendall } => sample_from_generator(generator, kendall, n, rng)?,
        })
    }
}

/// Records of one stratum and the dependence used to simulate them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGroup {
    pub label: String,
    pub covariates: Vec<Vec<f64>>,
    pub source: DependenceSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    FamilyPooled,
    FamilyStratified,
    GeneratorPooled,
    GeneratorStratified,
}

impl Approach {
    pub const ALL: [Approach; 4] =
        [Approach::FamilyPooled, Approach::FamilyStratified, Approach::GeneratorPooled, Approach::GeneratorStratified];
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::FamilyPooled => "family-pooled",
            Approach::FamilyStratified => "family-stratified",
            Approach::GeneratorPooled => "generator-pooled",
            Approach::GeneratorStratified => "generator-stratified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub approach: Approach,
    pub mean_1: f64,
    pub mean_2: f64,
    pub n: usize,
    /// Per-stratum Kendall tau of the dependence that was simulated.
    pub taus: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionComparison {
    pub family: Family,
    pub strata: Vec<String>,
    pub stratum_sizes: Vec<usize>,
    pub observed_mean_1: f64,
    pub observed_mean_2: f64,
    pub summaries: Vec<PredictionSummary>,
}

/// Draws `n` pairs split over groups in proportion to their record counts.
/// Each draw picks a covariate vector uniformly from its group and maps the
/// copula pair through the marginal quantile functions.
pub fn simulate_pairs(
    marginals: (&FittedMarginal, &FittedMarginal),
    groups: &[PredictionGroup],
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<(f64, f64)>, PipelineError> {
    let total: usize = groups.iter().map(|g| g.covariates.len()).sum();
    if total == 0 {
        return Err(PipelineError::Config("no records to predict for".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut assigned = 0;
    for (k, g) in groups.iter().enumerate() {
        let m = if k + 1 == groups.len() { n - assigned } else { n * g.covariates.len() / total };
        assigned += m;
        if m == 0 {
            continue;
        }
        let us = g.source.sample(m, rng)?;
        for (i, (u1, u2)) in us.into_iter().enumerate() {
            let z = &g.covariates[(i * 7919 + k) % g.covariates.len()];
            let (s1, k1) = marginals.0.predict_params(z, None)?;
            let (s2, k2) = marginals.1.predict_params(z, None)?;
            out.push((LifetimeFamily::Weibull.quantile(u1, s1, k1), LifetimeFamily::Weibull.quantile(u2, s2, k2)));
        }
    }
    Ok(out)
}

fn family_source(family: Family, result: &PipelineResult) -> Result<DependenceSource, PipelineError> {
    Ok(DependenceSource::Family(FamilyFit::from_tau(family, result.tau)?))
}

fn generator_source(result: &PipelineResult) -> DependenceSource {
    DependenceSource::Generator { generator: result.generator.clone(), kendall: result.kendall.clone() }
}

/// Runs the four prediction approaches on `dataset`: one parametric fit with
/// covariates, pooled and per-stratum generators, the given family calibrated
/// to each estimated tau. `strata` lists the conditions defining each stratum.
pub fn compare_approaches(
    dataset: &Dataset,
    strata: &[Vec<Condition>],
    family: Family,
    options: &PipelineOptions,
    n: usize,
    seed: u64,
) -> Result<PredictionComparison, PipelineError> {
    let pooled = run_pipeline(dataset, Mode::Param, &[], options)?;
    let models = pooled.models.clone().expect("parametric run keeps its models");
    let marginals = (&models.marginal_1, &models.marginal_2);

    let mut per_stratum = Vec::new();
    for conds in strata {
        let label = conds.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let resolved = conds.iter().map(|c| c.resolve(dataset)).collect::<Result<Vec<_>, _>>()?;
        let zs: Vec<Vec<f64>> = dataset
            .records
            .iter()
            .filter(|r| resolved.iter().all(|c| c.keeps(&r.z)))
            .map(|r| r.z.clone())
            .collect();
        let result = run_pipeline(dataset, Mode::Param, conds, options)?;
        per_stratum.push((label, zs, result));
    }
    let all_z: Vec<Vec<f64>> = dataset.records.iter().map(|r| r.z.clone()).collect();

    let mut summaries = Vec::new();
    for (a, approach) in Approach::ALL.into_iter().enumerate() {
        let groups: Vec<PredictionGroup> = match approach {
            Approach::FamilyPooled | Approach::GeneratorPooled => {
                let source = if approach == Approach::FamilyPooled {
                    family_source(family, &pooled)?
                } else {
                    generator_source(&pooled)
                };
                vec![PredictionGroup { label: "all".into(), covariates: all_z.clone(), source }]
            }
            _ => per_stratum
                .iter()
                .map(|(label, zs, res)| {
                    let source = if approach == Approach::FamilyStratified {
                        family_source(family, res)?
                    } else {
                        generator_source(res)
                    };
                    Ok(PredictionGroup { label: label.clone(), covariates: zs.clone(), source })
                })
                .collect::<Result<_, PipelineError>>()?,
        };
        let mut rng = stream(seed, a as u64);
        let pairs = simulate_pairs(marginals, &groups, n, &mut rng)?;
        let taus = match approach {
            Approach::FamilyPooled | Approach::GeneratorPooled => vec![("all".into(), pooled.tau)],
            _ => per_stratum.iter().map(|(l, _, r)| (l.clone(), r.tau)).collect(),
        };
        summaries.push(PredictionSummary {
            approach,
            mean_1: pairs.iter().map(|p| p.0).sum::<f64>() / n as f64,
            mean_2: pairs.iter().map(|p| p.1).sum::<f64>() / n as f64,
            n,
            taus,
        });
    }

    let len = dataset.len() as f64;
    Ok(PredictionComparison {
        family,
        strata: per_stratum.iter().map(|(l, _, _)| l.clone()).collect(),
        stratum_sizes: per_stratum.iter().map(|(_, z, _)| z.len()).collect(),
        observed_mean_1: dataset.records.iter().map(|r| r.y1).sum::<f64>() / len,
        observed_mean_2: dataset.records.iter().map(|r| r.y2).sum::<f64>() / len,
        summaries,
    })
}
