//! Bivariate Archimedean sampling.
//!
//! * [`marshall_olkin`]: frailty mixture, exact when the frailty has Laplace
//!   transform ψ.
//! * [`rlaptrans`]: draws from a distribution known only through its Laplace
//!   transform, by numerical inversion and safeguarded Newton root finding.
//! * [`sample_from_generator`]: for tabulated generators; draws
//!   `t ~ K` and `s ~ U(0, 1)` and returns `(ψ(sφ(t)), ψ((1 − s)φ(t)))`.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{FamilyError, FamilyFit};
use crate::kendall::{invert_generator, GeneratorCurve, KendallCurve};
use crate::rng::open01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("frailty draw failed: {0}")]
    FrailtyFailure(String),
    #[error("numerical Laplace inversion is non-monotone at theta = {theta} (cdf {cdf} vs target {target})")]
    InversionFailure { theta: f64, cdf: f64, target: f64 },
    #[error("no upper bound found: cdf stayed below {target} up to theta = 2^60")]
    NoUpperBound { target: f64 },
    #[error("Kendall curve cannot be inverted: {0}")]
    NonInvertibleK(String),
}

impl From<FamilyError> for SamplerError {
    fn from(e: FamilyError) -> Self {
        SamplerError::FrailtyFailure(e.to_string())
    }
}

/// Keep a copula coordinate strictly inside `(0, 1)`.
fn open_unit(u: f64) -> f64 {
    const TOP: f64 = 1.0 - f64::EPSILON / 2.0;
    if u.is_nan() {
        0.5
    } else {
        u.clamp(f64::MIN_POSITIVE, TOP)
    }
}

/// Marshall–Olkin: `θ ~ frailty`, `Xᵢ ~ U(0, 1)`, `Uᵢ = ψ(−ln Xᵢ / θ)`.
pub fn marshall_olkin<R, P, F>(psi: P, mut frailty: F, n: usize, rng: &mut R) -> Result<Vec<(f64, f64)>, SamplerError>
where
    R: Rng + ?Sized,
    P: Fn(f64) -> f64,
    F: FnMut(&mut R) -> Result<f64, SamplerError>,
{
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = frailty(rng)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(SamplerError::FrailtyFailure(format!("drew theta = {theta}")));
        }
        let x1 = open01(rng);
        let x2 = open01(rng);
        out.push((open_unit(psi(-x1.ln() / theta)), open_unit(psi(-x2.ln() / theta))));
    }
    Ok(out)
}

/// Marshall–Olkin with the family's own frailty.
pub fn sample_family<R: Rng + ?Sized>(fit: &FamilyFit, n: usize, rng: &mut R) -> Result<Vec<(f64, f64)>, SamplerError> {
    marshall_olkin(|s| fit.psi(s), |r: &mut R| Ok(fit.sample_frailty(r)?), n, rng)
}

/// Numerical inverse Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LaplaceInverter {
    /// Fixed Talbot contour with `nodes` points.
    Talbot { nodes: usize },
    /// Bromwich-line Fourier series with Euler summation: damping `a`,
    /// `burn_in` plain terms, then binomial averaging over `m + 1` partial sums.
    Euler { a: f64, burn_in: usize, m: usize },
}

impl Default for LaplaceInverter {
    fn default() -> Self {
        LaplaceInverter::Euler { a: 19.0, burn_in: 38, m: 11 }
    }
}

impl LaplaceInverter {
    /// `f(t)` from its transform `F`.
    pub fn invert<F: Fn(Complex64) -> Complex64>(&self, f: F, t: f64) -> f64 {
        match *self {
            LaplaceInverter::Talbot { nodes } => {
                let m = nodes as f64;
                let r = 2.0 * m / (5.0 * t);
                let mut acc = 0.5 * (f(Complex64::new(r, 0.0)) * (r * t).exp()).re;
                for k in 1..nodes {
                    let th = k as f64 * std::f64::consts::PI / m;
                    let cot = th.cos() / th.sin();
                    let s = Complex64::new(r * th * cot, r * th);
                    let sigma = th + (th * cot - 1.0) * cot;
                    acc += ((s * t).exp() * f(s) * Complex64::new(1.0, sigma)).re;
                }
                r / m * acc
            }
            LaplaceInverter::Euler { a, burn_in, m } => {
                let x = a / (2.0 * t);
                let step = std::f64::consts::PI / t;
                let total = burn_in + m;
                let mut partial = 0.5 * f(Complex64::new(x, 0.0)).re;
                let mut sums = Vec::with_capacity(m + 1);
                for k in 1..=total {
                    let term = f(Complex64::new(x, k as f64 * step)).re;
                    partial += if k % 2 == 0 { term } else { -term };
                    if k >= burn_in {
                        sums.push(partial);
                    }
                }
                let mut coef = 1.0;
                let mut avg = 0.0;
                for (k, s) in sums.iter().enumerate() {
                    avg += coef * s;
                    coef *= (m - k) as f64 / (k + 1) as f64;
                }
                (a / 2.0).exp() / t * avg / 2f64.powi(m as i32)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlaptransOptions {
    pub tol: f64,
    pub inverter: LaplaceInverter,
    pub start: f64,
    pub max_iter: usize,
}

impl Default for RlaptransOptions {
    fn default() -> Self {
        Self { tol: 1e-8, inverter: LaplaceInverter::default(), start: 1.0, max_iter: 500 }
    }
}

/// Draw `n` positive variates with Laplace transform `lt`.
pub fn rlaptrans<L, R>(lt: L, n: usize, rng: &mut R, tol: f64) -> Result<Vec<f64>, SamplerError>
where
    L: Fn(Complex64) -> Complex64,
    R: Rng + ?Sized,
{
    rlaptrans_with(lt, n, rng, &RlaptransOptions { tol, ..RlaptransOptions::default() })
}

pub fn rlaptrans_with<L, R>(lt: L, n: usize, rng: &mut R, opts: &RlaptransOptions) -> Result<Vec<f64>, SamplerError>
where
    L: Fn(Complex64) -> Complex64,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Ok(Vec::new());
    }
    let pdf = |t: f64| opts.inverter.invert(&lt, t);
    let cdf = |t: f64| opts.inverter.invert(|s| lt(s) / s, t);
    let mut u: Vec<f64> = (0..n).map(|_| open01(rng)).collect();
    u.sort_by(f64::total_cmp);
    let u_max = u[n - 1];

    let cap = 2f64.powi(60);
    let mut upper = opts.start;
    loop {
        let c = cdf(upper);
        if c.is_nan() {
            return Err(SamplerError::InversionFailure { theta: upper, cdf: c, target: u_max });
        }
        if c >= u_max {
            break;
        }
        upper *= 2.0;
        if upper > cap {
            return Err(SamplerError::NoUpperBound { target: u_max });
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut lower = 0.0;
    let mut t = 0.5 * upper.min(opts.start);
    for &target in &u {
        let (mut lo, mut hi) = (lower, upper);
        t = t.clamp(lo, hi);
        let mut done = false;
        for _ in 0..opts.max_iter {
            let c = cdf(t) - target;
            if c.is_nan() {
                return Err(SamplerError::InversionFailure { theta: t, cdf: c + target, target });
            }
            if c.abs() < opts.tol {
                done = true;
                break;
            }
            if c < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = pdf(t);
            let newton = t - c / d;
            t = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= opts.tol * hi.max(1.0) {
                done = true;
                break;
            }
        }
        if !done {
            return Err(SamplerError::InversionFailure { theta: t, cdf: cdf(t), target });
        }
        let c = cdf(lower);
        if lower > 0.0 && c > target + opts.tol.max(1e-6) {
            return Err(SamplerError::InversionFailure { theta: lower, cdf: c, target });
        }
        out.push(t);
        lower = t;
    }
    out.shuffle(rng);
    Ok(out)
}

/// Sample from a tabulated Archimedean copula given its generator and
/// Kendall curve (which must share a grid).
pub fn sample_from_generator<R: Rng + ?Sized>(
    gen: &GeneratorCurve,
    kendall: &KendallCurve,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>, SamplerError> {
    let m = gen.nu_grid.len();
    if kendall.nu_grid.len() != m + 1
        || gen.nu_grid.iter().zip(&kendall.nu_grid).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(SamplerError::NonInvertibleK("generator and Kendall grids differ".into()));
    }
    let psi = invert_generator(gen).map_err(|e| SamplerError::NonInvertibleK(e.to_string()))?;
    let floor = gen.nu_grid[0];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = kendall.quantile(open01(rng)).max(floor);
        let s = open01(rng);
        let lp = gen.log_phi_at(t);
        let u1 = psi.eval_log(s.ln() + lp);
        let u2 = psi.eval_log((-s).ln_1p() + lp);
        out.push((open_unit(u1), open_unit(u2)));
    }
    Ok(out)
}
