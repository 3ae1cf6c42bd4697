//! Bivariate joint distribution estimators for censored pairs.
//!
//! Both estimators mix two iterated integrals,
//! `w * ∫ F(y1 | t2) dF2(t2) + (1 - w) * ∫ F(y2 | t1) dF1(t1)`,
//! discretized as Riemann–Stieltjes sums over a lattice of jump points:
//!
//! * nonparametric: Kaplan–Meier outer integrators, Beran inner conditionals;
//! * parametric: censored Weibull regressions for both, with covariates
//!   integrated out against their empirical law (or a stratum of it).
//!
//! The result is always a [`DiscreteBivariateCDF`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::margins::FittedMarginal;
use crate::survival::{kaplan_meier, BeranEstimator, CensoredRecord, Coord, Kernel, StepDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JointError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("model schema does not match the sample: {0}")]
    SchemaMismatch(String),
    #[error("no record matches the conditioning {0}")]
    EmptyStratum(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
}

/// Mixing weight `w(y)` between the two iterated integrals.
#[derive(Clone)]
pub enum WeightPolicy {
    Constant(f64),
    Pluggable(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Default for WeightPolicy {
    fn default() -> Self {
        WeightPolicy::Constant(0.5)
    }
}

impl fmt::Debug for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPolicy::Constant(w) => write!(f, "Constant({w})"),
            WeightPolicy::Pluggable(_) => write!(f, "Pluggable(..)"),
        }
    }
}

impl WeightPolicy {
    pub fn constant(w: f64) -> Result<Self, JointError> {
        if (0.0..=1.0).contains(&w) {
            Ok(WeightPolicy::Constant(w))
        } else {
            Err(JointError::InvalidWeight(format!("{w} is outside [0, 1]")))
        }
    }

    fn at(&self, y1: f64, y2: f64) -> f64 {
        match self {
            WeightPolicy::Constant(w) => *w,
            WeightPolicy::Pluggable(f) => f(y1, y2).clamp(0.0, 1.0),
        }
    }

    fn uses_first(&self) -> bool {
        !matches!(self, WeightPolicy::Constant(w) if *w == 0.0)
    }

    fn uses_second(&self) -> bool {
        !matches!(self, WeightPolicy::Constant(w) if *w == 1.0)
    }
}

/// Dense lattice of cumulative values, row-major over `(axis1, axis2)`.
#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    axis1: Vec<f64>,
    axis2: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Lattice {
    fn eval(&self, y1: f64, y2: f64) -> f64 {
        let a = self.axis1.partition_point(|&g| g <= y1);
        let b = self.axis2.partition_point(|&g| g <= y2);
        if a == 0 || b == 0 {
            return 0.0;
        }
        self.cumulative[(a - 1) * self.axis2.len() + (b - 1)]
    }
}

/// Joint distribution as weighted support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBivariateCDF {
    pub support: Vec<(f64, f64)>,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// Number of negative lattice increments set to zero (non-constant weights only).
    #[serde(default)]
    pub clipped_masses: usize,
    #[serde(skip)]
    lattice: Option<Lattice>,
}

impl DiscreteBivariateCDF {
    /// From explicit atoms; zero masses are dropped.
    pub fn from_atoms(support: Vec<(f64, f64)>, masses: Vec<f64>) -> Self {
        let (support, masses): (Vec<_>, Vec<_>) =
            support.into_iter().zip(masses).filter(|(_, m)| *m > 0.0).unzip();
        let total_mass = masses.iter().sum();
        Self { support, masses, total_mass, clipped_masses: 0, lattice: None }
    }

    /// Empirical distribution of fully observed pairs, mass `1/n` each.
    pub fn empirical(pairs: &[(f64, f64)]) -> Self {
        let m = 1.0 / pairs.len() as f64;
        Self::from_atoms(pairs.to_vec(), vec![m; pairs.len()])
    }

    /// From a cumulative lattice; masses are the rectangle increments.
    fn from_lattice(axis1: Vec<f64>, axis2: Vec<f64>, cumulative: Vec<f64>) -> Self {
        let m2 = axis2.len();
        let at = |a: usize, b: usize| cumulative[a * m2 + b];
        let mut support = Vec::new();
        let mut masses = Vec::new();
        let mut clipped = 0;
        for a in 0..axis1.len() {
            for b in 0..m2 {
                let mut m = at(a, b);
                if a > 0 {
                    m -= at(a - 1, b);
                }
                if b > 0 {
                    m -= at(a, b - 1);
                }
                if a > 0 && b > 0 {
                    m += at(a - 1, b - 1);
                }
                if m < 0.0 {
                    // rounding noise is expected; genuine negatives come from
                    // non-constant weights
                    if m < -1e-12 {
                        clipped += 1;
                    }
                    continue;
                }
                if m > 0.0 {
                    support.push((axis1[a], axis2[b]));
                    masses.push(m);
                }
            }
        }
        let total_mass = masses.iter().sum();
        Self {
            support,
            masses,
            total_mass,
            clipped_masses: clipped,
            lattice: Some(Lattice { axis1, axis2, cumulative }),
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `H(y1, y2) = Σ masses · 1[support ≤ (y1, y2)]`.
    pub fn eval(&self, y1: f64, y2: f64) -> f64 {
        if y1 == f64::INFINITY && y2 == f64::INFINITY {
            return self.total_mass;
        }
        if let Some(l) = &self.lattice {
            if self.clipped_masses == 0 {
                return l.eval(y1, y2);
            }
        }
        self.support
            .iter()
            .zip(&self.masses)
            .filter(|((a, b), _)| *a <= y1 && *b <= y2)
            .map(|(_, m)| m)
            .sum()
    }

    /// Distribution function evaluated at every support point, computed from
    /// the masses by a sweep over the first coordinate with a Fenwick tree
    /// over ranks of the second.
    pub fn values_at_support(&self) -> Vec<f64> {
        let n = self.support.len();
        let mut ys: Vec<f64> = self.support.iter().map(|p| p.1).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let rank = |y: f64| ys.partition_point(|&v| v < y);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| self.support[i].0.total_cmp(&self.support[j].0));
        let mut tree = vec![0.0; ys.len() + 1];
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            // insert every point sharing this first coordinate before querying
            let x = self.support[order[i]].0;
            let mut j = i;
            while j < n && self.support[order[j]].0 == x {
                let mut k = rank(self.support[order[j]].1) + 1;
                while k < tree.len() {
                    tree[k] += self.masses[order[j]];
                    k += k & k.wrapping_neg();
                }
                j += 1;
            }
            for &idx in &order[i..j] {
                let mut k = rank(self.support[idx].1) + 1;
                let mut s = 0.0;
                while k > 0 {
                    s += tree[k];
                    k -= k & k.wrapping_neg();
                }
                out[idx] = s;
            }
            i = j;
        }
        out
    }

    /// Marginal distribution of one coordinate at `y` (the other at +∞).
    pub fn marginal(&self, coord: Coord, y: f64) -> f64 {
        match coord {
            Coord::First => self.eval(y, f64::INFINITY),
            Coord::Second => self.eval(f64::INFINITY, y),
        }
    }
}

/// Options shared by the joint estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOptions {
    /// Cap on lattice points per axis; longer axes are thinned to evenly
    /// spaced order statistics (mass aggregates onto retained points).
    pub max_axis: Option<usize>,
    pub kernel: Kernel,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self { max_axis: Some(500), kernel: Kernel::Epanechnikov }
    }
}

fn thin_axis(axis: Vec<f64>, max: Option<usize>) -> Vec<f64> {
    match max {
        Some(m) if m >= 2 && axis.len() > m => {
            let n = axis.len();
            let mut out: Vec<f64> = (0..m).map(|k| axis[(k * (n - 1)) / (m - 1)]).collect();
            out.dedup();
            out
        }
        _ => axis,
    }
}

fn uncensored_times(sample: &[CensoredRecord], coord: Coord) -> Vec<f64> {
    let mut t: Vec<f64> =
        sample.iter().filter(|r| r.observed(coord)).map(|r| r.time(coord)).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Combine the two cumulative integrals with the weight policy.
fn mix(
    axis1: &[f64],
    axis2: &[f64],
    first: Option<Vec<f64>>,
    second: Option<Vec<f64>>,
    weights: &WeightPolicy,
) -> Vec<f64> {
    let m2 = axis2.len();
    match (first, second) {
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (Some(a), Some(b)) => a
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(k, (x, y))| {
                let w = weights.at(axis1[k / m2], axis2[k % m2]);
                w * x + (1.0 - w) * y
            })
            .collect(),
        (None, None) => vec![0.0; axis1.len() * m2],
    }
}

/// Nonparametric joint estimator: Kaplan–Meier outer integrators and Beran
/// inner conditionals. `bandwidth1` smooths over the first coordinate (for
/// `F(y2 | y1)`), `bandwidth2` over the second (for `F(y1 | y2)`).
pub fn joint_cdf_nonparam(
    sample: &[CensoredRecord],
    bandwidth1: f64,
    bandwidth2: f64,
    weights: &WeightPolicy,
) -> Result<DiscreteBivariateCDF, JointError> {
    joint_cdf_nonparam_with(sample, bandwidth1, bandwidth2, weights, &JointOptions::default())
}

pub fn joint_cdf_nonparam_with(
    sample: &[CensoredRecord],
    bandwidth1: f64,
    bandwidth2: f64,
    weights: &WeightPolicy,
    options: &JointOptions,
) -> Result<DiscreteBivariateCDF, JointError> {
    if sample.len() < 2 {
        return Err(JointError::DegenerateSample("fewer than two records".into()));
    }
    for coord in [Coord::First, Coord::Second] {
        if !sample.iter().any(|r| r.observed(coord)) {
            return Err(JointError::DegenerateSample(format!("{coord:?} coordinate fully censored")));
        }
    }
    if !(bandwidth1 > 0.0 && bandwidth2 > 0.0) {
        return Err(JointError::DegenerateSample("bandwidths must be positive".into()));
    }
    let km = |coord: Coord| {
        let (t, d): (Vec<f64>, Vec<bool>) =
            sample.iter().map(|r| (r.time(coord), r.observed(coord))).unzip();
        kaplan_meier(&t, &d).map_err(|e| JointError::DegenerateSample(e.to_string()))
    };
    let km1 = km(Coord::First)?;
    let km2 = km(Coord::Second)?;
    let axis1 = thin_axis(km1.jump_points.clone(), options.max_axis);
    let axis2 = thin_axis(km2.jump_points.clone(), options.max_axis);
    let (m1, m2) = (axis1.len(), axis2.len());

    // ∫_0^{y2} F(y1 | t) dF2(t), outer sum over KM2 jumps, cumulated onto axis2
    let first = weights.uses_first().then(|| {
        let beran = BeranEstimator::new(sample, Coord::Second, options.kernel);
        let cols: Vec<Vec<f64>> = km2
            .jump_points
            .par_iter()
            .map(|&t| match beran.conditional(t, bandwidth2) {
                Ok(c) => axis1.iter().map(|&g| c.eval(g)).collect(),
                Err(_) => vec![0.0; m1],
            })
            .collect();
        outer_sum_over_second(&km2, &cols, &axis2, m1)
    });
    let second = weights.uses_second().then(|| {
        let beran = BeranEstimator::new(sample, Coord::First, options.kernel);
        let rows: Vec<Vec<f64>> = km1
            .jump_points
            .par_iter()
            .map(|&t| match beran.conditional(t, bandwidth1) {
                Ok(c) => axis2.iter().map(|&g| c.eval(g)).collect(),
                Err(_) => vec![0.0; m2],
            })
            .collect();
        outer_sum_over_first(&km1, &rows, &axis1, m2)
    });
    let cumulative = mix(&axis1, &axis2, first, second, weights);
    Ok(DiscreteBivariateCDF::from_lattice(axis1, axis2, cumulative))
}

/// `out[a, b] = Σ_{jumps t_k ≤ axis2[b]} mass_k · cols[k][a]`.
fn outer_sum_over_second(
    outer: &StepDistribution,
    cols: &[Vec<f64>],
    axis2: &[f64],
    m1: usize,
) -> Vec<f64> {
    let m2 = axis2.len();
    let masses = outer.masses();
    let mut out = vec![0.0; m1 * m2];
    let mut acc = vec![0.0; m1];
    let mut k = 0;
    for (b, &g) in axis2.iter().enumerate() {
        while k < outer.jump_points.len() && outer.jump_points[k] <= g {
            for a in 0..m1 {
                acc[a] += masses[k] * cols[k][a];
            }
            k += 1;
        }
        for a in 0..m1 {
            out[a * m2 + b] = acc[a];
        }
    }
    out
}

/// `out[a, b] = Σ_{jumps t_k ≤ axis1[a]} mass_k · rows[k][b]`.
fn outer_sum_over_first(
    outer: &StepDistribution,
    rows: &[Vec<f64>],
    axis1: &[f64],
    m2: usize,
) -> Vec<f64> {
    let masses = outer.masses();
    let mut out = vec![0.0; axis1.len() * m2];
    let mut acc = vec![0.0; m2];
    let mut k = 0;
    for (a, &g) in axis1.iter().enumerate() {
        while k < outer.jump_points.len() && outer.jump_points[k] <= g {
            for b in 0..m2 {
                acc[b] += masses[k] * rows[k][b];
            }
            k += 1;
        }
        out[a * m2..(a + 1) * m2].copy_from_slice(&acc);
    }
    out
}

/// The four regressions feeding the parametric estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModels {
    /// `Y1 | Z, t2`, partner time = uncensored second coordinate.
    pub model_1_given_2: FittedMarginal,
    /// `Y2 | Z, t1`.
    pub model_2_given_1: FittedMarginal,
    /// `Y1 | Z`.
    pub marginal_1: FittedMarginal,
    /// `Y2 | Z`.
    pub marginal_2: FittedMarginal,
}

impl MarginalModels {
    fn check_schema(&self, n_covariates: usize) -> Result<(), JointError> {
        for (name, m, partner) in [
            ("model_1_given_2", &self.model_1_given_2, true),
            ("model_2_given_1", &self.model_2_given_1, true),
            ("marginal_1", &self.marginal_1, false),
            ("marginal_2", &self.marginal_2, false),
        ] {
            if let Some(i) = m.max_covariate_index() {
                if i >= n_covariates {
                    return Err(JointError::SchemaMismatch(format!(
                        "{name} uses covariate {i}, sample has {n_covariates}"
                    )));
                }
            }
            if m.needs_partner() != partner {
                return Err(JointError::SchemaMismatch(format!(
                    "{name} {} a partner-time regressor",
                    if partner { "lacks" } else { "has" }
                )));
            }
        }
        Ok(())
    }
}

/// Partial covariate assignment for conditional estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateCondition {
    /// Categorical level: restrict the covariate law to matching records.
    Level { index: usize, value: f64 },
    /// Continuous pin: set the covariate to `value` in every record.
    Pin { index: usize, value: f64 },
    /// Stratum `z[index] <= value`.
    AtMost { index: usize, value: f64 },
    /// Stratum `z[index] > value`.
    Above { index: usize, value: f64 },
}

impl CovariateCondition {
    pub fn index(&self) -> usize {
        match *self {
            CovariateCondition::Level { index, .. }
            | CovariateCondition::Pin { index, .. }
            | CovariateCondition::AtMost { index, .. }
            | CovariateCondition::Above { index, .. } => index,
        }
    }

    pub fn keeps(&self, z: &[f64]) -> bool {
        match *self {
            CovariateCondition::Level { index, value } => z[index] == value,
            CovariateCondition::Pin { .. } => true,
            CovariateCondition::AtMost { index, value } => z[index] <= value,
            CovariateCondition::Above { index, value } => z[index] > value,
        }
    }
}

impl fmt::Display for CovariateCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateCondition::Level { index, value } => write!(f, "z[{index}] == {value}"),
            CovariateCondition::Pin { index, value } => write!(f, "z[{index}] := {value}"),
            CovariateCondition::AtMost { index, value } => write!(f, "z[{index}] <= {value}"),
            CovariateCondition::Above { index, value } => write!(f, "z[{index}] > {value}"),
        }
    }
}

/// Empirical covariate law after conditioning: distinct vectors with weights.
pub fn covariate_law(
    sample: &[CensoredRecord],
    conditions: &[CovariateCondition],
) -> Result<Vec<(Vec<f64>, f64)>, JointError> {
    let p = sample.first().map_or(0, |r| r.z.len());
    for c in conditions {
        if c.index() >= p {
            return Err(JointError::SchemaMismatch(format!(
                "condition on covariate {} but sample has {p}",
                c.index()
            )));
        }
    }
    let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, usize)> = BTreeMap::new();
    let mut kept = 0usize;
    for r in sample {
        if !conditions.iter().all(|c| c.keeps(&r.z)) {
            continue;
        }
        let mut z = r.z.clone();
        for c in conditions {
            if let CovariateCondition::Pin { index, value } = *c {
                z[index] = value;
            }
        }
        kept += 1;
        let key = z.iter().map(|v| v.to_bits()).collect();
        groups.entry(key).or_insert_with(|| (z, 0)).1 += 1;
    }
    if kept == 0 {
        let desc = conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        return Err(JointError::EmptyStratum(desc));
    }
    Ok(groups.into_values().map(|(z, c)| (z, c as f64 / kept as f64)).collect())
}

/// Parametric joint estimator with covariates integrated out against their
/// empirical law.
pub fn joint_cdf_param(
    models: &MarginalModels,
    sample: &[CensoredRecord],
    weights: &WeightPolicy,
) -> Result<DiscreteBivariateCDF, JointError> {
    joint_cdf_conditional_with(models, sample, &[], weights, &JointOptions::default())
}

/// Parametric joint estimator with some covariates fixed.
pub fn joint_cdf_conditional(
    models: &MarginalModels,
    sample: &[CensoredRecord],
    fixed: &[CovariateCondition],
    weights: &WeightPolicy,
) -> Result<DiscreteBivariateCDF, JointError> {
    joint_cdf_conditional_with(models, sample, fixed, weights, &JointOptions::default())
}

pub fn joint_cdf_conditional_with(
    models: &MarginalModels,
    sample: &[CensoredRecord],
    fixed: &[CovariateCondition],
    weights: &WeightPolicy,
    options: &JointOptions,
) -> Result<DiscreteBivariateCDF, JointError> {
    let p = sample.first().map_or(0, |r| r.z.len());
    if sample.iter().any(|r| r.z.len() != p) {
        return Err(JointError::SchemaMismatch("ragged covariate vectors".into()));
    }
    models.check_schema(p)?;
    let axis1 = thin_axis(uncensored_times(sample, Coord::First), options.max_axis);
    let axis2 = thin_axis(uncensored_times(sample, Coord::Second), options.max_axis);
    if axis1.is_empty() || axis2.is_empty() {
        return Err(JointError::DegenerateSample("a coordinate is fully censored".into()));
    }
    let law = covariate_law(sample, fixed)?;
    let (m1, m2) = (axis1.len(), axis2.len());
    let use_first = weights.uses_first();
    let use_second = weights.uses_second();

    let per_group: Vec<(Option<Vec<f64>>, Option<Vec<f64>>, f64)> = law
        .par_iter()
        .map(|(z, prob)| {
            let first = use_first.then(|| {
                // cell masses of the covariate-only marginal of Y2
                let mut prev = 0.0;
                let p2: Vec<f64> = axis2
                    .iter()
                    .map(|&g| {
                        let c = models.marginal_2.cdf_unchecked(g, z, None);
                        let m = c - prev;
                        prev = c;
                        m
                    })
                    .collect();
                let mut out = vec![0.0; m1 * m2];
                for a in 0..m1 {
                    let mut acc = 0.0;
                    for b in 0..m2 {
                        acc += p2[b] * models.model_1_given_2.cdf_unchecked(axis1[a], z, Some(axis2[b]));
                        out[a * m2 + b] = acc;
                    }
                }
                out
            });
            let second = use_second.then(|| {
                let mut prev = 0.0;
                let p1: Vec<f64> = axis1
                    .iter()
                    .map(|&g| {
                        let c = models.marginal_1.cdf_unchecked(g, z, None);
                        let m = c - prev;
                        prev = c;
                        m
                    })
                    .collect();
                let mut out = vec![0.0; m1 * m2];
                let mut acc = vec![0.0; m2];
                for a in 0..m1 {
                    for b in 0..m2 {
                        acc[b] += p1[a] * models.model_2_given_1.cdf_unchecked(axis2[b], z, Some(axis1[a]));
                    }
                    out[a * m2..(a + 1) * m2].copy_from_slice(&acc);
                }
                out
            });
            (first, second, *prob)
        })
        .collect();

    // fixed reduction order over groups
    let reduce = |pick: fn(&(Option<Vec<f64>>, Option<Vec<f64>>, f64)) -> Option<&Vec<f64>>| {
        let mut acc: Option<Vec<f64>> = None;
        for g in &per_group {
            if let Some(v) = pick(g) {
                let acc = acc.get_or_insert_with(|| vec![0.0; m1 * m2]);
                for (x, y) in acc.iter_mut().zip(v) {
                    *x += g.2 * y;
                }
            }
        }
        acc
    };
    let first = reduce(|g| g.0.as_ref());
    let second = reduce(|g| g.1.as_ref());
    let cumulative = mix(&axis1, &axis2, first, second, weights);
    Ok(DiscreteBivariateCDF::from_lattice(axis1, axis2, cumulative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::LinearPredictorSpec;

    fn toy() -> Vec<CensoredRecord> {
        vec![
            CensoredRecord::new(1.0, 2.0, true, true, vec![]),
            CensoredRecord::new(2.0, 1.0, true, true, vec![]),
            CensoredRecord::new(3.0, 3.0, true, false, vec![]),
        ]
    }

    #[test]
    fn nonparam_toy_matches_hand_riemann_stieltjes_sum() {
        // h large enough that every uncensored conditioning record gets weight
        let h = 10.0;
        let s = toy();
        let cdf = joint_cdf_nonparam(&s, h, h, &WeightPolicy::Constant(0.5)).unwrap();
        let k = |u: f64| crate::survival::epanechnikov(u / h);
        // KM1: jumps 1,2,3 each 1/3. KM2: jumps at 1 (1/3), 2 (1/3 of remaining 2/3 → S=1/3? ) compute:
        // y2 = 1 (event), 2 (event), 3 (censored): S(1) = 2/3, S(2) = 2/3 * 1/2 = 1/3.
        let p2 = [(1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)];
        let p1 = [(1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 1.0 / 3.0)];
        // F(y1 | t2): weights on records with delta2 = 1 (records 0 and 1)
        let f1_given_2 = |y1: f64, t2: f64| -> f64 {
            let w0 = k(t2 - 2.0); // record 0: y1 = 1
            let w1 = k(t2 - 1.0); // record 1: y1 = 2
            let mut s = 1.0;
            if y1 >= 1.0 {
                s *= 1.0 - w0 / (w0 + w1);
            }
            if y1 >= 2.0 {
                s *= 1.0 - w1 / w1;
            }
            1.0 - s
        };
        // F(y2 | t1): all records have delta1 = 1; y2 sorted: rec1 (1, ev), rec0 (2, ev), rec2 (3, cens)
        let f2_given_1 = |y2: f64, t1: f64| -> f64 {
            let w = [k(t1 - 1.0), k(t1 - 2.0), k(t1 - 3.0)];
            let mut s = 1.0;
            if y2 >= 1.0 {
                s *= 1.0 - w[1] / (w[0] + w[1] + w[2]);
            }
            if y2 >= 2.0 {
                s *= 1.0 - w[0] / (w[0] + w[2]);
            }
            1.0 - s
        };
        for &y1 in &[1.0, 2.0, 3.0, 10.0] {
            for &y2 in &[1.0, 2.0, 10.0] {
                let a: f64 = p2.iter().filter(|(t, _)| *t <= y2).map(|(t, m)| m * f1_given_2(y1, *t)).sum();
                let b: f64 = p1.iter().filter(|(t, _)| *t <= y1).map(|(t, m)| m * f2_given_1(y2, *t)).sum();
                let expect = 0.5 * a + 0.5 * b;
                assert!((cdf.eval(y1, y2) - expect).abs() < 1e-14, "({y1},{y2}): {} vs {expect}", cdf.eval(y1, y2));
            }
        }
        assert!((cdf.eval(3.0, 2.0) - cdf.total_mass).abs() < 1e-14);
        assert_eq!(cdf.eval(f64::INFINITY, f64::INFINITY), cdf.total_mass);
    }

    #[test]
    fn comonotone_uncensored_sample_tracks_empirical_cdf() {
        let n = 40;
        let s: Vec<CensoredRecord> = (1..=n)
            .map(|i| CensoredRecord::new(i as f64, i as f64, true, true, vec![]))
            .collect();
        // bandwidth below the spacing: each conditional is a point mass
        let cdf = joint_cdf_nonparam(&s, 0.5, 0.5, &WeightPolicy::default()).unwrap();
        for i in 1..=n {
            let y = i as f64;
            let emp = i as f64 / n as f64;
            assert!((cdf.eval(y, y) - emp).abs() <= 1.0 / n as f64);
        }
        assert!((cdf.total_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn values_at_support_match_direct_sums() {
        let cdf = DiscreteBivariateCDF::from_atoms(
            vec![(1.0, 3.0), (2.0, 1.0), (2.0, 2.0), (3.0, 3.0), (0.5, 0.5)],
            vec![0.1, 0.2, 0.3, 0.25, 0.15],
        );
        let v = cdf.values_at_support();
        for (k, &(a, b)) in cdf.support.iter().enumerate() {
            assert!((v[k] - cdf.eval(a, b)).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_policy_range() {
        assert!(WeightPolicy::constant(1.2).is_err());
        assert!(WeightPolicy::constant(0.3).is_ok());
    }

    #[test]
    fn schema_checks() {
        let m = FittedMarginal::from_coefficients(
            LinearPredictorSpec::with_covariates(vec![3], true),
            vec![0.0, 0.0, 0.0],
            LinearPredictorSpec::intercept_only(),
            vec![0.0],
        );
        let marg = FittedMarginal::from_coefficients(
            LinearPredictorSpec::intercept_only(),
            vec![0.0],
            LinearPredictorSpec::intercept_only(),
            vec![0.0],
        );
        let models = MarginalModels {
            model_1_given_2: m.clone(),
            model_2_given_1: m,
            marginal_1: marg.clone(),
            marginal_2: marg,
        };
        let s = vec![CensoredRecord::new(1.0, 1.0, true, true, vec![0.0])];
        assert!(matches!(
            joint_cdf_param(&models, &s, &WeightPolicy::default()),
            Err(JointError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn empty_stratum_is_reported() {
        let s = vec![CensoredRecord::new(1.0, 1.0, true, true, vec![1.0])];
        let err = covariate_law(&s, &[CovariateCondition::Level { index: 0, value: 2.0 }]).unwrap_err();
        assert!(matches!(err, JointError::EmptyStratum(_)));
    }
}
