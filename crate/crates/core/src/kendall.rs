//! Kendall distribution, Kendall's tau and the Archimedean generator
//! recovered from a Kendall curve.
//!
//! The generator is held as `log φ` so that steep curves (strong dependence,
//! or empirical curves hitting the denominator clip) stay finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::joint::DiscreteBivariateCDF;
use crate::numeric::{interp_linear, isotonic_increasing, trapezoid, unit_grid};

pub const DEFAULT_GRID: usize = 1001;
pub const DEFAULT_NU0: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// Tolerance for comparing a pseudo-observation against a grid point.
const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KendallError {
    #[error("joint distribution has no mass")]
    EmptyCdf,
    #[error("grid needs at least two points, got {0}")]
    GridTooSmall(usize),
    #[error("anchor nu0 = {nu0} must lie strictly inside ({lower}, 1)")]
    InvalidAnchor { nu0: f64, lower: f64 },
    #[error("generator is not strictly decreasing near nu = {at}")]
    NonMonotone { at: f64 },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// Kendall distribution tabulated on `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KendallCurve {
    pub nu_grid: Vec<f64>,
    pub k_values: Vec<f64>,
    /// Whether the isotonic projection changed the raw values.
    #[serde(default)]
    pub isotonic_applied: bool,
}

impl KendallCurve {
    /// From tabulated values. The last grid point must be 1; values are
    /// clamped to `[0, 1]`, made nondecreasing, and `K(1)` is set to 1.
    pub fn from_values(nu_grid: Vec<f64>, mut k_values: Vec<f64>) -> Result<Self, KendallError> {
        if nu_grid.len() < 2 {
            return Err(KendallError::GridTooSmall(nu_grid.len()));
        }
        if nu_grid.len() != k_values.len() {
            return Err(KendallError::InvalidCurve("grid and values differ in length".into()));
        }
        if !nu_grid.windows(2).all(|w| w[0] < w[1]) || nu_grid[0] <= 0.0 {
            return Err(KendallError::InvalidCurve("grid must be strictly increasing in (0, 1]".into()));
        }
        if (nu_grid[nu_grid.len() - 1] - 1.0).abs() > GRID_TOL {
            return Err(KendallError::InvalidCurve("grid must end at 1".into()));
        }
        if k_values.iter().any(|k| !k.is_finite()) {
            return Err(KendallError::InvalidCurve("non-finite K value".into()));
        }
        for k in &mut k_values {
            *k = k.clamp(0.0, 1.0);
        }
        let isotonic_applied = isotonic_increasing(&mut k_values);
        *k_values.last_mut().unwrap() = 1.0;
        Ok(Self { nu_grid, k_values, isotonic_applied })
    }

    /// Tabulate a closed-form Kendall function on the uniform grid.
    pub fn from_fn(grid_size: usize, k: impl Fn(f64) -> f64) -> Result<Self, KendallError> {
        let grid = unit_grid(grid_size);
        let values = grid.iter().map(|&v| k(v)).collect();
        Self::from_values(grid, values)
    }

    /// Independence copula, `K(ν) = ν − ν ln ν`.
    pub fn independence(grid_size: usize) -> Result<Self, KendallError> {
        Self::from_fn(grid_size, |v| v - v * v.ln())
    }

    pub fn len(&self) -> usize {
        self.nu_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu_grid.is_empty()
    }

    /// Piecewise-linear evaluation with `K(0) = 0`.
    pub fn eval(&self, nu: f64) -> f64 {
        if nu <= 0.0 {
            return 0.0;
        }
        if nu < self.nu_grid[0] {
            return self.k_values[0] * nu / self.nu_grid[0];
        }
        interp_linear(&self.nu_grid, &self.k_values, nu)
    }

    /// `λ(ν) = ν − K(ν)` on the grid.
    pub fn lambda(&self) -> Vec<f64> {
        self.nu_grid.iter().zip(&self.k_values).map(|(v, k)| v - k).collect()
    }

    /// Largest `ν − K(ν)`; positive values contradict the Archimedean shape.
    pub fn max_lambda(&self) -> f64 {
        self.lambda().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `ν` with `K(ν) ≥ u`, by inverse interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k0 = self.k_values[0];
        if u <= k0 {
            return if k0 > 0.0 { self.nu_grid[0] * u / k0 } else { self.nu_grid[0] };
        }
        let hi = self.k_values.partition_point(|&k| k < u);
        if hi >= self.k_values.len() {
            return 1.0;
        }
        let (k_lo, k_hi) = (self.k_values[hi - 1], self.k_values[hi]);
        let (v_lo, v_hi) = (self.nu_grid[hi - 1], self.nu_grid[hi]);
        if k_hi == k_lo {
            v_hi
        } else {
            v_lo + (u - k_lo) / (k_hi - k_lo) * (v_hi - v_lo)
        }
    }

    /// Resample onto another grid by interpolation.
    pub fn resample(&self, nu_grid: &[f64]) -> Result<Self, KendallError> {
        Self::from_values(nu_grid.to_vec(), nu_grid.iter().map(|&v| self.eval(v)).collect())
    }

    /// `∫₀¹ K` with constant continuation below the first grid point.
    pub fn integral(&self) -> f64 {
        self.k_values[0] * self.nu_grid[0] + trapezoid(&self.nu_grid, &self.k_values)
    }
}

/// Kendall curve of a joint distribution: pseudo-observations `V = H/total`
/// at every atom, weighted by their masses.
pub fn kendall_from_joint(cdf: &DiscreteBivariateCDF, grid_size: usize) -> Result<KendallCurve, KendallError> {
    if cdf.is_empty() || cdf.total_mass <= 0.0 {
        return Err(KendallError::EmptyCdf);
    }
    if grid_size < 2 {
        return Err(KendallError::GridTooSmall(grid_size));
    }
    let total = cdf.total_mass;
    let mut pairs: Vec<(f64, f64)> = cdf
        .values_at_support()
        .into_iter()
        .zip(&cdf.masses)
        .map(|(h, &m)| (h / total, m))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let grid = unit_grid(grid_size);
    let mut k = Vec::with_capacity(grid_size);
    let mut acc = 0.0;
    let mut i = 0;
    for &g in &grid {
        while i < pairs.len() && pairs[i].0 <= g + GRID_TOL {
            acc += pairs[i].1;
            i += 1;
        }
        k.push(acc / total);
    }
    KendallCurve::from_values(grid, k)
}

/// Kendall's tau with a flag telling whether clipping to `[−1, 1]` fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub clipped: bool,
}

/// `τ = 3 − 4∫K`, clipped to `[−1, 1]`.
pub fn kendall_tau(curve: &KendallCurve) -> f64 {
    kendall_tau_checked(curve).tau
}

pub fn kendall_tau_checked(curve: &KendallCurve) -> TauEstimate {
    let raw = 3.0 - 4.0 * curve.integral();
    TauEstimate { tau: raw.clamp(-1.0, 1.0), clipped: !(-1.0..=1.0).contains(&raw) }
}

/// `τ = 1 + 4∫λ`; the `ν` part is integrated exactly so this agrees with
/// [`kendall_tau`] up to rounding.
pub fn kendall_tau_lambda(curve: &KendallCurve) -> f64 {
    let v1 = curve.nu_grid[0];
    let below = 0.5 * v1 * v1 - curve.k_values[0] * v1;
    let raw = 1.0 + 4.0 * (below + trapezoid(&curve.nu_grid, &curve.lambda()));
    raw.clamp(-1.0, 1.0)
}

/// Generator `φ` tabulated as `log φ` on the Kendall grid without `ν = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCurve {
    pub nu_grid: Vec<f64>,
    pub log_phi: Vec<f64>,
    pub nu0: f64,
    pub epsilon: f64,
    /// Number of grid points where `t − K(t)` was clipped to `−ε`.
    #[serde(default)]
    pub clip_count: usize,
}

impl GeneratorCurve {
    pub fn phi_values(&self) -> Vec<f64> {
        self.log_phi.iter().map(|l| l.exp()).collect()
    }

    /// `log φ(ν)`, linear between nodes; `−∞` at `ν = 1`.
    pub fn log_phi_at(&self, nu: f64) -> f64 {
        if nu == self.nu0 {
            return 0.0;
        }
        let last = self.nu_grid.len() - 1;
        if nu >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if nu > self.nu_grid[last] {
            // φ is linear towards φ(1) = 0 on the last cell
            let frac = (1.0 - nu) / (1.0 - self.nu_grid[last]);
            return self.log_phi[last] + frac.ln();
        }
        interp_linear(&self.nu_grid, &self.log_phi, nu)
    }

    pub fn phi(&self, nu: f64) -> f64 {
        self.log_phi_at(nu).exp()
    }

    /// `K(ν) = ν − φ/φ′` by central differences of `log φ`; the endpoints use
    /// one-sided differences.
    pub fn kendall_values(&self) -> Vec<f64> {
        let n = self.nu_grid.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let d = (self.log_phi[b] - self.log_phi[a]) / (self.nu_grid[b] - self.nu_grid[a]);
                self.nu_grid[i] - 1.0 / d
            })
            .collect()
    }

    /// Same generator multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let shift = c.ln();
        Self { log_phi: self.log_phi.iter().map(|l| l + shift).collect(), ..self.clone() }
    }

    /// Tabulate a closed-form generator on the Kendall grid of size `grid_size`.
    pub fn from_fn(grid_size: usize, nu0: f64, phi: impl Fn(f64) -> f64) -> Result<Self, KendallError> {
        let mut grid = unit_grid(grid_size);
        grid.pop();
        let anchor = phi(nu0).ln();
        let log_phi = grid.iter().map(|&v| if v == nu0 { 0.0 } else { phi(v).ln() - anchor }).collect();
        Ok(Self { nu_grid: grid, log_phi, nu0, epsilon: 0.0, clip_count: 0 })
    }
}

/// `φ(ν) = exp ∫_{ν₀}^{ν} dt / min(t − K(t), −ε)` by the trapezoid rule.
pub fn generator_from_kendall(curve: &KendallCurve, nu0: f64, epsilon: f64) -> Result<GeneratorCurve, KendallError> {
    let n = curve.nu_grid.len() - 1;
    if n < 2 {
        return Err(KendallError::GridTooSmall(curve.nu_grid.len()));
    }
    let lower = curve.nu_grid[0];
    if !(nu0 > lower && nu0 < 1.0) {
        return Err(KendallError::InvalidAnchor { nu0, lower });
    }
    let epsilon = epsilon.abs();
    let grid = curve.nu_grid[..n].to_vec();
    let mut clip_count = 0;
    let integrand: Vec<f64> = grid
        .iter()
        .zip(&curve.k_values)
        .map(|(&t, &k)| {
            let d = t - k;
            if d > -epsilon {
                clip_count += 1;
            }
            1.0 / d.min(-epsilon)
        })
        .collect();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..n {
        acc += 0.5 * (grid[i] - grid[i - 1]) * (integrand[i] + integrand[i - 1]);
        cumulative.push(acc);
    }
    let anchor = interp_linear(&grid, &cumulative, nu0);
    let log_phi = cumulative
        .iter()
        .zip(&grid)
        .map(|(c, &v)| if v == nu0 { 0.0 } else { c - anchor })
        .collect();
    Ok(GeneratorCurve { nu_grid: grid, log_phi, nu0, epsilon, clip_count })
}

/// Inverse of a tabulated generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Psi {
    /// `log φ` in increasing order (so `ν` decreasing).
    log_phi: Vec<f64>,
    nu: Vec<f64>,
}

pub fn invert_generator(gen: &GeneratorCurve) -> Result<Psi, KendallError> {
    for (w, v) in gen.log_phi.windows(2).zip(&gen.nu_grid[1..]) {
        if !(w[1] < w[0]) || !w[1].is_finite() {
            return Err(KendallError::NonMonotone { at: *v });
        }
    }
    Ok(Psi {
        log_phi: gen.log_phi.iter().rev().copied().collect(),
        nu: gen.nu_grid.iter().rev().copied().collect(),
    })
}

impl Psi {
    /// `ψ(s)` with a flag set when `s` lies beyond the tabulated range.
    pub fn eval_flagged(&self, s: f64) -> (f64, bool) {
        if s <= 0.0 {
            return (1.0, false);
        }
        self.eval_log_flagged(s.ln())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_flagged(s).0
    }

    /// `ψ(exp(log_s))`.
    pub fn eval_log_flagged(&self, log_s: f64) -> (f64, bool) {
        if log_s == f64::NEG_INFINITY {
            return (1.0, false);
        }
        let n = self.log_phi.len();
        if log_s < self.log_phi[0] {
            // φ linear from (ν_last, φ_last) to (1, 0)
            let frac = (log_s - self.log_phi[0]).exp();
            return (1.0 - frac * (1.0 - self.nu[0]), false);
        }
        if log_s > self.log_phi[n - 1] {
            return (self.nu[n - 1], true);
        }
        (interp_linear(&self.log_phi, &self.nu, log_s), false)
    }

    pub fn eval_log(&self, log_s: f64) -> f64 {
        self.eval_log_flagged(log_s).0
    }

    /// Smallest tabulated `ν`, the floor of the evaluator's range.
    pub fn min_nu(&self) -> f64 {
        self.nu[self.nu.len() - 1]
    }
}
