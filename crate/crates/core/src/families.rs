//! Clayton, Frank, Gumbel and Joe Archimedean families.
//!
//! Parameterizations:
//!
//! | family  | φ(t)                                   | α range   | τ(α)                       |
//! |---------|----------------------------------------|-----------|----------------------------|
//! | Clayton | (t^(−α) − 1)/α                         | α > 0     | α/(α + 2)                  |
//! | Frank   | −ln[(e^(−αt) − 1)/(e^(−α) − 1)]        | α ≠ 0     | 1 − 4/α·(1 − D₁(α))        |
//! | Gumbel  | (−ln t)^α                              | α ≥ 1     | 1 − 1/α                    |
//! | Joe     | −ln[1 − (1 − t)^α]                     | α ≥ 1     | 1 − 4∫K (digamma form)     |
//!
//! Frailties with Laplace transform ψ: Gamma with shape 1/α and scale α, positive stable of index
//! 1/α, logarithmic series with p = 1 − e^(−α), Sibuya(1/α).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::kendall::{generator_from_kendall, GeneratorCurve, KendallCurve, KendallError};
use crate::numeric::{adaptive_simpson, brent};
use crate::rng::open01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("{family}: {what} = {value} is outside the domain")]
    DomainError { family: Family, what: &'static str, value: f64 },
    #[error("{family}: tau = {tau} is not attainable")]
    UnattainableTau { family: Family, tau: f64 },
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Clayton,
    Frank,
    Gumbel,
    Joe,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Clayton => "Clayton",
            Family::Frank => "Frank",
            Family::Gumbel => "Gumbel",
            Family::Joe => "Joe",
        })
    }
}

impl FromStr for Family {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clayton" => Ok(Family::Clayton),
            "frank" => Ok(Family::Frank),
            "gumbel" => Ok(Family::Gumbel),
            "joe" => Ok(Family::Joe),
            _ => Err(FamilyError::UnknownFamily(s.to_string())),
        }
    }
}

const FRANK_SMALL: f64 = 1e-3;
const TAU_TOL: f64 = 1e-13;

impl Family {
    pub const ALL: [Family; 4] = [Family::Clayton, Family::Frank, Family::Gumbel, Family::Joe];

    pub fn validate(self, alpha: f64) -> Result<(), FamilyError> {
        let ok = alpha.is_finite()
            && match self {
                Family::Clayton => alpha > 0.0,
                Family::Frank => alpha != 0.0,
                Family::Gumbel | Family::Joe => alpha >= 1.0,
            };
        if ok {
            Ok(())
        } else {
            Err(FamilyError::DomainError { family: self, what: "alpha", value: alpha })
        }
    }

    fn check_t(self, t: f64) -> Result<(), FamilyError> {
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(FamilyError::DomainError { family: self, what: "t", value: t })
        }
    }

    /// Generator `φ = ψ⁻¹` on `(0, 1]`.
    pub fn phi(self, alpha: f64, t: f64) -> Result<f64, FamilyError> {
        self.validate(alpha)?;
        self.check_t(t)?;
        Ok(self.phi_unchecked(alpha, t))
    }

    /// `ψ` on `[0, ∞)`.
    pub fn psi(self, alpha: f64, s: f64) -> Result<f64, FamilyError> {
        self.validate(alpha)?;
        if !(s >= 0.0) {
            return Err(FamilyError::DomainError { family: self, what: "s", value: s });
        }
        Ok(self.psi_unchecked(alpha, s))
    }

    /// `K(ν) = ν − φ(ν)/φ′(ν)`.
    pub fn kendall_k(self, alpha: f64, nu: f64) -> Result<f64, FamilyError> {
        self.validate(alpha)?;
        self.check_t(nu)?;
        Ok(self.kendall_k_unchecked(alpha, nu))
    }

    pub(crate) fn phi_unchecked(self, a: f64, t: f64) -> f64 {
        match self {
            Family::Clayton => (-a * t.ln()).exp_m1() / a,
            Family::Frank => -(-(-a * t).exp() * (-a * (1.0 - t)).exp_m1() / (-a).exp_m1()).ln_1p(),
            Family::Gumbel => (-t.ln()).powf(a),
            Family::Joe => -(-(1.0 - t).powf(a)).ln_1p(),
        }
    }

    pub(crate) fn psi_unchecked(self, a: f64, s: f64) -> f64 {
        match self {
            Family::Clayton => (-(a * s).ln_1p() / a).exp(),
            Family::Frank if a > 0.0 => -((-(-s).exp_m1()) + (-s - a).exp()).ln() / a,
            Family::Frank => -((-s).exp() * (-a).exp_m1()).ln_1p() / a,
            Family::Gumbel => (-s.powf(1.0 / a)).exp(),
            Family::Joe => -((-(-s).exp_m1()).ln() / a).exp_m1(),
        }
    }

    pub(crate) fn kendall_k_unchecked(self, a: f64, v: f64) -> f64 {
        if v >= 1.0 {
            return 1.0;
        }
        match self {
            Family::Clayton => v - v * (a * v.ln()).exp_m1() / a,
            Family::Gumbel => v - v * v.ln() / a,
            Family::Frank => v + self.phi_unchecked(a, v) * (a * v).exp_m1() / a,
            Family::Joe => {
                let w = (1.0 - v).powf(a);
                v - (1.0 - w) * (-w).ln_1p() / (a * (1.0 - v).powf(a - 1.0))
            }
        }
    }

    /// Kendall's tau of the family at `alpha`.
    pub fn alpha_to_tau(self, alpha: f64) -> Result<f64, FamilyError> {
        self.validate(alpha)?;
        Ok(match self {
            Family::Clayton => alpha / (alpha + 2.0),
            Family::Gumbel => 1.0 - 1.0 / alpha,
            Family::Frank => frank_tau(alpha),
            Family::Joe => joe_tau(alpha),
        })
    }

    /// Attainable tau range, open at both ends.
    pub fn tau_range(self) -> (f64, f64) {
        match self {
            Family::Frank => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn tau_to_alpha(self, tau: f64) -> Result<f64, FamilyError> {
        let (lo, hi) = self.tau_range();
        if !(tau > lo && tau < hi) || (self == Family::Frank && tau == 0.0) {
            return Err(FamilyError::UnattainableTau { family: self, tau });
        }
        let unattainable = || FamilyError::UnattainableTau { family: self, tau };
        match self {
            Family::Clayton => Ok(2.0 * tau / (1.0 - tau)),
            Family::Gumbel => Ok(1.0 / (1.0 - tau)),
            Family::Frank => {
                let target = tau.abs();
                let upper = expand_bracket(1.0, |a| frank_tau(a) - target).ok_or_else(unattainable)?;
                let a = brent(|a| frank_tau(a) - target, 1e-12, upper, TAU_TOL, 500).ok_or_else(unattainable)?;
                Ok(a.copysign(tau))
            }
            Family::Joe => {
                let upper = expand_bracket(2.0, |a| joe_tau(a) - tau).ok_or_else(unattainable)?;
                brent(|a| joe_tau(a) - tau, 1.0, upper, TAU_TOL, 500).ok_or_else(unattainable)
            }
        }
    }

    /// One draw of the frailty whose Laplace transform is `ψ`.
    pub fn sample_frailty<R: Rng + ?Sized>(self, alpha: f64, rng: &mut R) -> Result<f64, FamilyError> {
        self.validate(alpha)?;
        match self {
            Family::Clayton => {
                let g = Gamma::new(1.0 / alpha, alpha)
                    .map_err(|_| FamilyError::DomainError { family: self, what: "alpha", value: alpha })?;
                Ok(g.sample(rng))
            }
            Family::Gumbel => Ok(positive_stable(1.0 / alpha, rng)),
            Family::Frank => {
                if alpha < 0.0 {
                    return Err(FamilyError::DomainError { family: self, what: "alpha", value: alpha });
                }
                Ok(log_series(alpha, rng))
            }
            Family::Joe => Ok(sibuya(1.0 / alpha, rng)),
        }
    }
}

/// Double `start` until `f` changes sign relative to `f(tiny)`; `f` is increasing.
fn expand_bracket(start: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let mut hi = start;
    for _ in 0..60 {
        if f(hi) > 0.0 {
            return Some(hi);
        }
        hi *= 2.0;
    }
    None
}

/// Frank tau through the Debye function `D₁`.
fn frank_tau(a: f64) -> f64 {
    if a.abs() < FRANK_SMALL {
        return a / 9.0 - a * a * a / 900.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let d1 = adaptive_simpson(&integrand, 0.0, a, 1e-14) / a;
    1.0 - 4.0 / a * (1.0 - d1)
}

/// Joe tau `1 − (2/α)·S` with `S = (ψ(x) − ψ(2))/(x − 2)`, `x = 1 + 2/α`.
fn joe_tau(a: f64) -> f64 {
    let x = 1.0 + 2.0 / a;
    let d = x - 2.0;
    let s = if d.abs() < 1e-3 {
        // Taylor expansion of the divided difference around x = 2
        let trigamma2 = PI * PI / 6.0 - 1.0;
        let tetragamma2 = 2.0 - 2.0 * 1.202_056_903_159_594_2;
        let pentagamma2 = PI.powi(4) / 15.0 - 6.0;
        trigamma2 + tetragamma2 * d / 2.0 + pentagamma2 * d * d / 6.0
    } else {
        (digamma(x) - digamma(2.0)) / d
    };
    1.0 - 2.0 / a * s
}

/// Positive stable variate with Laplace transform `exp(−s^β)`, `β ∈ (0, 1]`
/// (Kanter's representation).
fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta >= 1.0 {
        return 1.0;
    }
    let u = PI * open01(rng);
    let e: f64 = Exp1.sample(rng);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta);
    a * b
}

/// Logarithmic-series variate with `p = 1 − e^(−α)` (Kemp's algorithm LK).
fn log_series<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let p = -(-alpha).exp_m1();
    let v = open01(rng);
    if v >= p {
        return 1.0;
    }
    let u = open01(rng);
    let q = -(-alpha * u).exp_m1();
    if v <= q * q {
        (1.0 + v.ln() / q.ln()).floor()
    } else if v <= q {
        2.0
    } else {
        1.0
    }
}

/// Sibuya variate with parameter `β ∈ (0, 1]`.
fn sibuya<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta >= 1.0 {
        return 1.0;
    }
    let u = open01(rng);
    if u <= beta {
        return 1.0;
    }
    let ginv = ((1.0 - u) * ln_gamma(1.0 - beta).exp()).powf(-1.0 / beta);
    let f = ginv.floor();
    if ginv > 1.0 / f64::EPSILON {
        return f;
    }
    let ln_beta_fn = ln_gamma(f) + ln_gamma(1.0 - beta) - ln_gamma(f + 1.0 - beta);
    if 1.0 - u < 1.0 / (f * ln_beta_fn.exp()) {
        ginv.ceil()
    } else {
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSource {
    TauInversion,
    Direct,
}

/// A family with a validated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: Family,
    pub alpha: f64,
    pub tau: f64,
    pub source: FitSource,
}

impl FamilyFit {
    pub fn from_alpha(family: Family, alpha: f64) -> Result<Self, FamilyError> {
        let tau = family.alpha_to_tau(alpha)?;
        Ok(Self { family, alpha, tau, source: FitSource::Direct })
    }

    pub fn from_tau(family: Family, tau: f64) -> Result<Self, FamilyError> {
        let alpha = family.tau_to_alpha(tau)?;
        Ok(Self { family, alpha, tau, source: FitSource::TauInversion })
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.family.phi_unchecked(self.alpha, t)
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.family.psi_unchecked(self.alpha, s)
    }

    pub fn kendall_k(&self, nu: f64) -> f64 {
        self.family.kendall_k_unchecked(self.alpha, nu)
    }

    pub fn sample_frailty<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, FamilyError> {
        self.family.sample_frailty(self.alpha, rng)
    }

    pub fn kendall_curve(&self, grid_size: usize) -> Result<KendallCurve, KendallError> {
        KendallCurve::from_fn(grid_size, |v| self.kendall_k(v))
    }

    /// Generator recovered numerically from the closed-form Kendall curve.
    pub fn generator_curve(&self, grid_size: usize, nu0: f64, epsilon: f64) -> Result<GeneratorCurve, KendallError> {
        generator_from_kendall(&self.kendall_curve(grid_size)?, nu0, epsilon)
    }

    /// Closed-form generator tabulated on the same grid.
    pub fn exact_generator_curve(&self, grid_size: usize, nu0: f64) -> Result<GeneratorCurve, KendallError> {
        GeneratorCurve::from_fn(grid_size, nu0, |v| self.phi(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn closed_form_values() {
        assert!((Family::Clayton.phi(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        for t in [0.1, 0.5, 0.9] {
            assert!((Family::Gumbel.phi(1.0, t).unwrap() + f64::ln(t)).abs() < 1e-15);
        }
        let e1 = (-1.0f64).exp();
        assert!((Family::Gumbel.kendall_k(2.0, e1).unwrap() - 1.5 * e1).abs() < 1e-15);
        let lim = 0.5 - 0.5 * 0.5f64.ln();
        assert!((Family::Clayton.kendall_k(1e-9, 0.5).unwrap() - lim).abs() < 1e-8);
    }

    #[test]
    fn psi_inverts_phi_everywhere() {
        for fam in Family::ALL {
            for tau in [0.2, 0.5, 0.8] {
                let a = fam.tau_to_alpha(tau).unwrap();
                for k in 1..=99 {
                    let t = k as f64 / 100.0;
                    let back = fam.psi(a, fam.phi(a, t).unwrap()).unwrap();
                    assert!((back - t).abs() < 1e-12, "{fam} {a} {t}: {back}");
                }
                assert_eq!(fam.kendall_k(a, 1.0).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn kendall_dominates_diagonal() {
        for fam in Family::ALL {
            for tau in [0.05, 0.3, 0.6, 0.9] {
                let a = fam.tau_to_alpha(tau).unwrap();
                for k in 1..1000 {
                    let v = k as f64 / 1000.0;
                    assert!(fam.kendall_k(a, v).unwrap() >= v - 1e-12, "{fam} {tau} {v}");
                }
            }
        }
    }

    #[test]
    fn tau_alpha_round_trip() {
        assert!((Family::Clayton.tau_to_alpha(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((Family::Gumbel.tau_to_alpha(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(Family::Frank.alpha_to_tau(1e-8).unwrap().abs() < 1e-8);
        for fam in Family::ALL {
            for k in 1..=18 {
                let tau = k as f64 * 0.05;
                let a = fam.tau_to_alpha(tau).unwrap();
                let back = fam.alpha_to_tau(a).unwrap();
                assert!((back - tau).abs() < 1e-8, "{fam} {tau} -> {a} -> {back}");
            }
        }
        let a = Family::Frank.tau_to_alpha(-0.4).unwrap();
        assert!((Family::Frank.alpha_to_tau(a).unwrap() + 0.4).abs() < 1e-8);
        assert!(Family::Joe.tau_to_alpha(-0.1).is_err());
        assert!(Family::Clayton.tau_to_alpha(1.0).is_err());
    }

    #[test]
    fn joe_tau_matches_series() {
        for a in [1.3, 1.999_9, 2.0, 2.000_2, 3.0, 7.0] {
            let series: f64 = (1..400_000)
                .map(|k| {
                    let k = k as f64;
                    1.0 / (k * (a * k + 2.0) * (a * (k - 1.0) + 2.0))
                })
                .sum();
            assert!((joe_tau(a) - (1.0 - 4.0 * series)).abs() < 1e-9, "{a}");
        }
    }

    #[test]
    fn frailty_moments() {
        let mut rng = stream(1, 0);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| Family::Clayton.sample_frailty(1.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.02);
        assert!((0..100).all(|_| Family::Joe.sample_frailty(1.0, &mut rng).unwrap() == 1.0));
        // empirical Laplace transforms at s = 1
        for (fam, a) in [(Family::Clayton, 2.0), (Family::Clayton, 0.4), (Family::Frank, 5.0), (Family::Joe, 2.5), (Family::Gumbel, 2.0)] {
            let lt: f64 = (0..n).map(|_| (-fam.sample_frailty(a, &mut rng).unwrap()).exp()).sum::<f64>() / n as f64;
            let expect = fam.psi(a, 1.0).unwrap();
            assert!((lt - expect).abs() < 0.01, "{fam}: {lt} vs {expect}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("frank".parse::<Family>().unwrap(), Family::Frank);
        assert!("amh".parse::<Family>().is_err());
    }
}
