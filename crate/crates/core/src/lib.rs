//! Estimating Archimedean copula generators from right-censored bivariate
//! survival data, optionally conditioned on covariates.
//!
//! The pipeline runs in four steps:
//! 1. Estimate the joint distribution function. This uses either Beran conditional Kaplan–Meier
//!    estimators ([`joint::joint_cdf_nonparam`]) or censored Weibull regressions
//!    ([`joint::joint_cdf_param`], [`joint::joint_cdf_conditional`]).
//! 2. Compute its Kendall distribution `K` and Kendall's tau ([`kendall`]).
//! 3. Recover the generator `φ` from `K` and invert it ([`kendall::generator_from_kendall`]).
//! 4. Compare the result against Clayton, Frank, Gumbel and Joe copulas by
//!    simulation ([`selector::select_copula`]).
//!
//! [`pipeline::run_pipeline`] chains the first three steps on a [`io::Dataset`].

pub mod export;
pub mod families;
pub mod io;
pub mod joint;
pub mod kendall;
pub mod margins;
pub mod numeric;
pub mod pipeline;
pub mod prediction;
pub mod rng;
pub mod sampler;
pub mod selector;
pub mod survival;
pub mod synth;

pub use families::{Family, FamilyFit};
pub use io::{load_csv, Dataset, Schema};
pub use joint::{DiscreteBivariateCDF, WeightPolicy};
pub use kendall::{generator_from_kendall, invert_generator, kendall_from_joint, kendall_tau, GeneratorCurve, KendallCurve};
pub use margins::{fit_censored_weibull, FittedMarginal};
pub use pipeline::{run_pipeline, Condition, Mode, PipelineError, PipelineOptions, PipelineResult};
pub use sampler::{marshall_olkin, rlaptrans, sample_family, sample_from_generator};
pub use selector::{select_copula, SelectionConfig, SelectionReport};
pub use survival::{kaplan_meier, BeranEstimator, CensoredRecord, StepDistribution};
pub use synth::{synth_generate, SynthConfig};
