//! Nonparametric estimators for right-censored data.
//!
//! Kaplan–Meier marginals, kernel-weighted (Beran) conditional product-limit
//! estimators and a K-fold cross-validated bandwidth for the latter. All
//! estimators share one weighted product-limit routine, so a Beran estimator
//! with constant weights is bit-identical to Kaplan–Meier on the same records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurvivalError {
    #[error("empty sample")]
    EmptySample,
    #[error("times and indicators differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("negative or non-finite time {0}")]
    InvalidTime(f64),
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("no uncensored record carries positive kernel weight at {at}")]
    ZeroTotalWeight { at: f64 },
    #[error("cross-validation found no scorable hold-out record")]
    NoValidFold,
    #[error("empty bandwidth grid")]
    EmptyGrid,
}

/// One bivariate observation: possibly-censored times, indicators (`true` =
/// event observed) and a covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredRecord {
    pub y1: f64,
    pub y2: f64,
    pub delta1: bool,
    pub delta2: bool,
    pub z: Vec<f64>,
}

impl CensoredRecord {
    pub fn new(y1: f64, y2: f64, delta1: bool, delta2: bool, z: Vec<f64>) -> Self {
        Self { y1, y2, delta1, delta2, z }
    }

    pub fn time(&self, coord: Coord) -> f64 {
        match coord {
            Coord::First => self.y1,
            Coord::Second => self.y2,
        }
    }

    pub fn observed(&self, coord: Coord) -> bool {
        match coord {
            Coord::First => self.delta1,
            Coord::Second => self.delta2,
        }
    }
}

/// Which coordinate of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coord {
    First,
    Second,
}

impl Coord {
    pub fn other(self) -> Coord {
        match self {
            Coord::First => Coord::Second,
            Coord::Second => Coord::First,
        }
    }
}

/// Right-continuous step distribution function with jumps at `jump_points`.
///
/// `cumulative_probs[i]` is the value on `[jump_points[i], jump_points[i+1])`.
/// The last value may be below one when the largest observation is censored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    pub jump_points: Vec<f64>,
    pub cumulative_probs: Vec<f64>,
    /// Set when no event was observed; the distribution is then identically zero.
    pub all_censored: bool,
}

impl StepDistribution {
    pub fn zero() -> Self {
        Self { jump_points: Vec::new(), cumulative_probs: Vec::new(), all_censored: true }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative_probs[k - 1]
        }
    }

    /// Probability mass at each jump point.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative_probs
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.cumulative_probs.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.jump_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_points.is_empty()
    }
}

/// Smoothing kernels on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Uniform,
    Triangular,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => epanechnikov(u),
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Triangular => (1.0 - u.abs()).max(0.0),
        }
    }
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Weighted product-limit estimate over records pre-sorted by time.
///
/// Ties are grouped: at each distinct time the factor is
/// `1 - (event weight at t) / (weight at risk at t)`, with censored records at
/// `t` still in the risk set.
fn product_limit_sorted(times: &[f64], events: &[bool], weights: &[f64]) -> StepDistribution {
    let n = times.len();
    let mut at_risk: f64 = 0.0;
    // suffix sums computed in one reverse pass, grouped by distinct time
    let mut groups: Vec<(f64, f64, f64)> = Vec::new(); // (time, event weight, at-risk weight)
    let mut i = n;
    while i > 0 {
        let t = times[i - 1];
        let mut j = i;
        let mut ev = 0.0;
        let mut tot = 0.0;
        while j > 0 && times[j - 1] == t {
            let w = weights[j - 1];
            tot += w;
            if events[j - 1] {
                ev += w;
            }
            j -= 1;
        }
        at_risk += tot;
        if ev > 0.0 {
            groups.push((t, ev, at_risk));
        }
        i = j;
    }
    if groups.is_empty() {
        return StepDistribution::zero();
    }
    groups.reverse();
    let mut surv = 1.0;
    let mut jump_points = Vec::with_capacity(groups.len());
    let mut cumulative_probs = Vec::with_capacity(groups.len());
    for (t, ev, risk) in groups {
        surv *= 1.0 - ev / risk;
        jump_points.push(t);
        cumulative_probs.push(1.0 - surv);
    }
    StepDistribution { jump_points, cumulative_probs, all_censored: false }
}

fn validate(times: &[f64], deltas: &[bool]) -> Result<(), SurvivalError> {
    if times.len() != deltas.len() {
        return Err(SurvivalError::LengthMismatch(times.len(), deltas.len()));
    }
    if times.is_empty() {
        return Err(SurvivalError::EmptySample);
    }
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(SurvivalError::InvalidTime(t));
    }
    Ok(())
}

fn sorted_order(times: &[f64], deltas: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    // events before censorings at equal times
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(deltas[b].cmp(&deltas[a])));
    order
}

/// Kaplan–Meier estimate of the distribution function.
///
/// An all-censored sample yields the zero distribution with `all_censored` set.
pub fn kaplan_meier(times: &[f64], deltas: &[bool]) -> Result<StepDistribution, SurvivalError> {
    validate(times, deltas)?;
    let order = sorted_order(times, deltas);
    let t: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let d: Vec<bool> = order.iter().map(|&i| deltas[i]).collect();
    let w = vec![1.0; t.len()];
    Ok(product_limit_sorted(&t, &d, &w))
}

/// Beran estimator of the distribution of one coordinate given the other.
///
/// Records are sorted once by the response time; each call only recomputes
/// kernel weights. Records censored in the conditioning coordinate get zero
/// weight.
#[derive(Debug, Clone)]
pub struct BeranEstimator {
    response_times: Vec<f64>,
    response_events: Vec<bool>,
    conditioning: Vec<f64>,
    conditioning_observed: Vec<bool>,
    kernel: Kernel,
}

impl BeranEstimator {
    /// Estimator of the coordinate other than `condition_on`.
    pub fn new(sample: &[CensoredRecord], condition_on: Coord, kernel: Kernel) -> Self {
        let resp = condition_on.other();
        let times: Vec<f64> = sample.iter().map(|r| r.time(resp)).collect();
        let deltas: Vec<bool> = sample.iter().map(|r| r.observed(resp)).collect();
        let order = sorted_order(&times, &deltas);
        Self {
            response_times: order.iter().map(|&i| times[i]).collect(),
            response_events: order.iter().map(|&i| deltas[i]).collect(),
            conditioning: order.iter().map(|&i| sample[i].time(condition_on)).collect(),
            conditioning_observed: order.iter().map(|&i| sample[i].observed(condition_on)).collect(),
            kernel,
        }
    }

    pub fn weights(&self, at: f64, bandwidth: f64) -> Vec<f64> {
        self.conditioning
            .iter()
            .zip(&self.conditioning_observed)
            .map(|(&c, &obs)| if obs { self.kernel.eval((at - c) / bandwidth) } else { 0.0 })
            .collect()
    }

    pub fn conditional(&self, at: f64, bandwidth: f64) -> Result<StepDistribution, SurvivalError> {
        if !(bandwidth > 0.0) {
            return Err(SurvivalError::InvalidBandwidth(bandwidth));
        }
        let w = self.weights(at, bandwidth);
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(SurvivalError::ZeroTotalWeight { at });
        }
        Ok(product_limit_sorted(&self.response_times, &self.response_events, &w))
    }
}

/// Beran conditional distribution of the coordinate other than `condition_on`,
/// evaluated at conditioning value `at`, with the Epanechnikov kernel.
pub fn beran_conditional(
    sample: &[CensoredRecord],
    condition_on: Coord,
    at: f64,
    bandwidth: f64,
) -> Result<StepDistribution, SurvivalError> {
    beran_conditional_with(sample, condition_on, at, bandwidth, Kernel::Epanechnikov)
}

pub fn beran_conditional_with(
    sample: &[CensoredRecord],
    condition_on: Coord,
    at: f64,
    bandwidth: f64,
    kernel: Kernel,
) -> Result<StepDistribution, SurvivalError> {
    if sample.is_empty() {
        return Err(SurvivalError::EmptySample);
    }
    BeranEstimator::new(sample, condition_on, kernel).conditional(at, bandwidth)
}

const CV_FOLDS: usize = 5;
const CV_MAX_THRESHOLDS: usize = 50;

/// Log-spaced default grid: 20 bandwidths spanning `[0.05, 2]` times the
/// sample standard deviation of the uncensored conditioning values.
pub fn default_bandwidth_grid(sample: &[CensoredRecord], condition_on: Coord) -> Vec<f64> {
    let vals: Vec<f64> = sample
        .iter()
        .filter(|r| r.observed(condition_on))
        .map(|r| r.time(condition_on))
        .collect();
    let sd = if vals.len() > 1 { numeric::sample_std(&vals) } else { 1.0 };
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let (lo, hi) = (0.05f64.ln(), 2f64.ln());
    (0..20).map(|k| sd * (lo + (hi - lo) * k as f64 / 19.0).exp()).collect()
}

/// Cross-validated Brier score of one bandwidth (lower is better).
pub fn cv_score(
    sample: &[CensoredRecord],
    condition_on: Coord,
    bandwidth: f64,
    kernel: Kernel,
) -> Option<f64> {
    let resp = condition_on.other();
    let mut thresholds: Vec<f64> = sample
        .iter()
        .filter(|r| r.observed(resp))
        .map(|r| r.time(resp))
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    if thresholds.is_empty() {
        return None;
    }
    if thresholds.len() > CV_MAX_THRESHOLDS {
        let m = thresholds.len();
        thresholds = (0..CV_MAX_THRESHOLDS)
            .map(|k| thresholds[(k * (m - 1)) / (CV_MAX_THRESHOLDS - 1)])
            .collect();
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for fold in 0..CV_FOLDS {
        let train: Vec<CensoredRecord> = sample
            .iter()
            .enumerate()
            .filter(|(i, _)| i % CV_FOLDS != fold)
            .map(|(_, r)| r.clone())
            .collect();
        if train.is_empty() {
            continue;
        }
        let est = BeranEstimator::new(&train, condition_on, kernel);
        let (tt, td): (Vec<f64>, Vec<bool>) =
            train.iter().map(|r| (r.time(resp), r.observed(resp))).unzip();
        let fallback = kaplan_meier(&tt, &td).ok();
        for (_, r) in sample
            .iter()
            .enumerate()
            .filter(|(i, r)| i % CV_FOLDS == fold && r.delta1 && r.delta2)
        {
            let pred = match est.conditional(r.time(condition_on), bandwidth) {
                Ok(f) => f,
                Err(_) => match &fallback {
                    Some(f) => f.clone(),
                    None => continue,
                },
            };
            let y = r.time(resp);
            let s: f64 = thresholds
                .iter()
                .map(|&t| {
                    let obs = if y <= t { 1.0 } else { 0.0 };
                    (obs - pred.eval(t)).powi(2)
                })
                .sum();
            total += s / thresholds.len() as f64;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Bandwidth from `grid` minimizing the 5-fold cross-validated Brier score.
/// Ties go to the earliest grid entry.
pub fn cv_bandwidth(
    sample: &[CensoredRecord],
    condition_on: Coord,
    grid: &[f64],
) -> Result<f64, SurvivalError> {
    cv_bandwidth_with(sample, condition_on, grid, Kernel::Epanechnikov)
}

pub fn cv_bandwidth_with(
    sample: &[CensoredRecord],
    condition_on: Coord,
    grid: &[f64],
    kernel: Kernel,
) -> Result<f64, SurvivalError> {
    if grid.is_empty() {
        return Err(SurvivalError::EmptyGrid);
    }
    if let Some(&h) = grid.iter().find(|h| !(**h > 0.0)) {
        return Err(SurvivalError::InvalidBandwidth(h));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if sample.iter().filter(|r| r.delta1 && r.delta2).count() < 10 {
        return Err(SurvivalError::NoValidFold);
    }
    let scores: Vec<Option<f64>> =
        grid.par_iter().map(|&h| cv_score(sample, condition_on, h, kernel)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| grid[i]).ok_or(SurvivalError::NoValidFold)
}
