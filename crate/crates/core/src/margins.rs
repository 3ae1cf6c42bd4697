//! Censored two-parameter regressions with log links.
//!
//! Each distribution parameter (scale, shape) gets its own linear predictor in
//! the covariates and, optionally, the partner coordinate's time. Coefficients
//! are found by maximum likelihood with a BFGS optimizer, finished by damped
//! Newton steps when the line search stalls.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginError {
    #[error("model is not identifiable: {0}")]
    NonIdentifiable(String),
    #[error("optimizer hit the iteration cap ({iterations}) with gradient norm {grad_norm:e}")]
    Diverged { iterations: usize, grad_norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Columns entering one linear predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearPredictorSpec {
    pub include_intercept: bool,
    pub covariate_indices: Vec<usize>,
    /// Adds the partner coordinate's (uncensored) time as a regressor.
    pub include_partner_time: bool,
}

impl LinearPredictorSpec {
    pub fn intercept_only() -> Self {
        Self { include_intercept: true, covariate_indices: Vec::new(), include_partner_time: false }
    }

    /// No columns at all: the parameter is pinned at `exp(0) = 1`.
    pub fn fixed_unit() -> Self {
        Self { include_intercept: false, covariate_indices: Vec::new(), include_partner_time: false }
    }

    pub fn with_covariates(indices: Vec<usize>, partner: bool) -> Self {
        Self { include_intercept: true, covariate_indices: indices, include_partner_time: partner }
    }

    pub fn n_coeffs(&self) -> usize {
        usize::from(self.include_intercept)
            + self.covariate_indices.len()
            + usize::from(self.include_partner_time)
    }

    pub fn validate(&self, n_covariates: usize) -> Result<(), MarginError> {
        let mut seen = vec![false; n_covariates];
        for &i in &self.covariate_indices {
            if i >= n_covariates {
                return Err(MarginError::DimensionMismatch(format!(
                    "covariate index {i} out of range for {n_covariates} covariates"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(MarginError::InvalidInput(format!("duplicate covariate index {i}")));
            }
        }
        Ok(())
    }

    /// Design row; layout is `[intercept?, covariates..., partner?]`.
    pub fn row(&self, z: &[f64], partner: Option<f64>) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_coeffs());
        if self.include_intercept {
            row.push(1.0);
        }
        row.extend(self.covariate_indices.iter().map(|&i| z[i]));
        if self.include_partner_time {
            row.push(partner.unwrap_or(f64::NAN));
        }
        row
    }
}

/// How right-censored records enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CensoredTerm {
    /// `ln(1 - F)`, the right-censoring likelihood.
    #[default]
    Survival,
    /// `ln F`; only for comparing against the literal printed formula.
    PrintedCdf,
}

/// Lifetime distribution with log-linked scale and shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LifetimeFamily {
    #[default]
    Weibull,
}

impl LifetimeFamily {
    pub fn cdf(self, y: f64, scale: f64, shape: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-(y / scale).powf(shape)).exp_m1()
                }
            }
        }
    }

    pub fn quantile(self, p: f64, scale: f64, shape: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull => scale * (-(-p).ln_1p()).powf(1.0 / shape),
        }
    }

    /// Log-likelihood contribution and its derivatives with respect to the
    /// two linear predictors `(eta_scale, eta_shape)`.
    fn loglik_terms(
        self,
        y: f64,
        observed: bool,
        eta_scale: f64,
        eta_shape: f64,
        censored: CensoredTerm,
    ) -> (f64, f64, f64) {
        match self {
            LifetimeFamily::Weibull => {
                let k = eta_shape.exp();
                let ly = y.ln();
                let z = k * (ly - eta_scale);
                let u = z.exp();
                if observed {
                    let ll = eta_shape - ly + z - u;
                    (ll, k * (u - 1.0), 1.0 + z - u * z)
                } else {
                    match censored {
                        CensoredTerm::Survival => (-u, k * u, -u * z),
                        CensoredTerm::PrintedCdf => {
                            let ll = (-(-u).exp_m1()).ln();
                            let dz = if u > 0.0 { u / u.exp_m1() } else { 1.0 };
                            (ll, -k * dz, z * dz)
                        }
                    }
                }
            }
        }
    }
}

/// Negative log-likelihood of a censored regression as a function of the
/// stacked coefficient vector `[scale coeffs..., shape coeffs...]`.
#[derive(Debug, Clone)]
pub struct CensoredLikelihood {
    pub family: LifetimeFamily,
    pub censored: CensoredTerm,
    responses: Vec<f64>,
    deltas: Vec<bool>,
    scale_design: Vec<Vec<f64>>,
    shape_design: Vec<Vec<f64>>,
}

impl CensoredLikelihood {
    pub fn new(
        responses: &[f64],
        deltas: &[bool],
        covariates: &[Vec<f64>],
        partner_times: Option<&[f64]>,
        spec_scale: &LinearPredictorSpec,
        spec_shape: &LinearPredictorSpec,
    ) -> Result<Self, MarginError> {
        let n = responses.len();
        if deltas.len() != n || covariates.len() != n {
            return Err(MarginError::DimensionMismatch(format!(
                "{n} responses, {} indicators, {} covariate rows",
                deltas.len(),
                covariates.len()
            )));
        }
        if n == 0 {
            return Err(MarginError::NonIdentifiable("empty sample".into()));
        }
        if let Some(&y) = responses.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(MarginError::InvalidInput(format!("response {y} is not positive")));
        }
        let p = covariates[0].len();
        if covariates.iter().any(|z| z.len() != p) {
            return Err(MarginError::DimensionMismatch("ragged covariate rows".into()));
        }
        spec_scale.validate(p)?;
        spec_shape.validate(p)?;
        let needs_partner = spec_scale.include_partner_time || spec_shape.include_partner_time;
        match partner_times {
            Some(t) if t.len() != n => {
                return Err(MarginError::DimensionMismatch("partner times length".into()))
            }
            None if needs_partner => {
                return Err(MarginError::DimensionMismatch("spec needs partner times".into()))
            }
            _ => {}
        }
        let partner = |i: usize| partner_times.map(|t| t[i]);
        let scale_design = (0..n).map(|i| spec_scale.row(&covariates[i], partner(i))).collect();
        let shape_design = (0..n).map(|i| spec_shape.row(&covariates[i], partner(i))).collect();
        Ok(Self {
            family: LifetimeFamily::Weibull,
            censored: CensoredTerm::Survival,
            responses: responses.to_vec(),
            deltas: deltas.to_vec(),
            scale_design,
            shape_design,
        })
    }

    pub fn n_scale(&self) -> usize {
        self.scale_design.first().map_or(0, Vec::len)
    }

    pub fn n_shape(&self) -> usize {
        self.shape_design.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.n_scale() + self.n_shape()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.value_and_gradient(params).0
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let ns = self.n_scale();
        let (beta, gamma) = params.split_at(ns);
        let mut nll = 0.0;
        let mut grad = vec![0.0; params.len()];
        for i in 0..self.responses.len() {
            let xs = &self.scale_design[i];
            let xk = &self.shape_design[i];
            let eta_s: f64 = xs.iter().zip(beta).map(|(a, b)| a * b).sum();
            let eta_k: f64 = xk.iter().zip(gamma).map(|(a, b)| a * b).sum();
            let (ll, ds, dk) = self.family.loglik_terms(
                self.responses[i],
                self.deltas[i],
                eta_s,
                eta_k,
                self.censored,
            );
            nll -= ll;
            for (g, x) in grad[..ns].iter_mut().zip(xs) {
                *g -= ds * x;
            }
            for (g, x) in grad[ns..].iter_mut().zip(xk) {
                *g -= dk * x;
            }
        }
        (nll, grad)
    }

    /// Hessian by central differences of the analytic gradient.
    pub fn hessian(&self, params: &[f64]) -> Vec<Vec<f64>> {
        let d = params.len();
        let mut h = vec![vec![0.0; d]; d];
        let mut x = params.to_vec();
        for j in 0..d {
            let step = 1e-5 * params[j].abs().max(1.0);
            x[j] = params[j] + step;
            let (_, gp) = self.value_and_gradient(&x);
            x[j] = params[j] - step;
            let (_, gm) = self.value_and_gradient(&x);
            x[j] = params[j];
            for i in 0..d {
                h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = m;
                h[j][i] = m;
            }
        }
        h
    }

    /// Rows of the two designs restricted to uncensored records.
    fn uncensored_designs(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let idx: Vec<usize> = (0..self.responses.len()).filter(|&i| self.deltas[i]).collect();
        (
            idx.iter().map(|&i| self.scale_design[i].clone()).collect(),
            idx.iter().map(|&i| self.shape_design[i].clone()).collect(),
        )
    }

    /// Column-wise affine standardization: the likelihood in standardized
    /// coordinates, plus the map back to the original coefficients.
    fn standardized(&self) -> (CensoredLikelihood, Standardizer) {
        let sc = Standardizer::fit(&self.scale_design);
        let sh = Standardizer::fit(&self.shape_design);
        let mut out = self.clone();
        out.scale_design = self.scale_design.iter().map(|r| sc.apply(r)).collect();
        out.shape_design = self.shape_design.iter().map(|r| sh.apply(r)).collect();
        (out, Standardizer::stack(sc, sh))
    }
}

/// Per-column centering (when an intercept column is present) and scaling.
#[derive(Debug, Clone)]
struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
    /// Position of the intercept column in each block, if any.
    intercepts: Vec<Option<usize>>,
    blocks: Vec<(usize, usize)>,
}

impl Standardizer {
    fn fit(design: &[Vec<f64>]) -> Self {
        let d = design.first().map_or(0, Vec::len);
        let n = design.len() as f64;
        let intercept = (0..d).find(|&j| design.iter().all(|r| r[j] == 1.0));
        let mut center = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            if Some(j) == intercept {
                continue;
            }
            let m = design.iter().map(|r| r[j]).sum::<f64>() / n;
            let c = if intercept.is_some() { m } else { 0.0 };
            let var = design.iter().map(|r| (r[j] - c).powi(2)).sum::<f64>() / n;
            center[j] = c;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { center, scale, intercepts: vec![intercept], blocks: vec![(0, d)] }
    }

    fn stack(a: Standardizer, b: Standardizer) -> Self {
        let da = a.center.len();
        let db = b.center.len();
        let mut center = a.center;
        center.extend(b.center);
        let mut scale = a.scale;
        scale.extend(b.scale);
        Self {
            center,
            scale,
            intercepts: vec![a.intercepts[0], b.intercepts[0]],
            blocks: vec![(0, da), (da, da + db)],
        }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| if Some(j) == self.intercepts[0] { x } else { (x - self.center[j]) / self.scale[j] })
            .collect()
    }

    /// Standardized coefficients -> original coefficients.
    fn to_original(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        for (b, &(lo, hi)) in self.blocks.iter().enumerate() {
            let mut shift = 0.0;
            for j in lo..hi {
                if Some(j - lo) == self.intercepts[b] {
                    continue;
                }
                out[j] = theta[j] / self.scale[j];
                shift += out[j] * self.center[j];
            }
            if let Some(ic) = self.intercepts[b] {
                out[lo + ic] = theta[lo + ic] - shift;
            }
        }
        out
    }

    /// Original coefficients -> standardized coefficients.
    fn to_standard(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; beta.len()];
        for (b, &(lo, hi)) in self.blocks.iter().enumerate() {
            let mut shift = 0.0;
            for j in lo..hi {
                if Some(j - lo) == self.intercepts[b] {
                    continue;
                }
                out[j] = beta[j] * self.scale[j];
                shift += beta[j] * self.center[j];
            }
            if let Some(ic) = self.intercepts[b] {
                out[lo + ic] = beta[lo + ic] + shift;
            }
        }
        out
    }
}

/// Numerical rank via modified Gram–Schmidt with a relative tolerance.
pub fn column_rank(rows: &[Vec<f64>]) -> usize {
    let d = rows.first().map_or(0, Vec::len);
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut rank = 0;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for col in cols.iter_mut() {
        let norm0 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for q in &basis {
            let proj: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum();
            for (c, qi) in col.iter_mut().zip(q) {
                *c -= proj * qi;
            }
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 > 0.0 && norm > 1e-9 * norm0 {
            basis.push(col.iter().map(|x| x / norm).collect());
            rank += 1;
        }
    }
    rank
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub censored: CensoredTerm,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-6, censored: CensoredTerm::Survival }
    }
}

/// Fitted censored regression (coefficients, specs, diagnostics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMarginal {
    pub family: LifetimeFamily,
    pub scale_coeffs: Vec<f64>,
    pub shape_coeffs: Vec<f64>,
    pub spec_scale: LinearPredictorSpec,
    pub spec_shape: LinearPredictorSpec,
    pub neg_loglik: f64,
    pub converged: bool,
    pub n_iterations: usize,
    pub censored_term: CensoredTerm,
}

impl FittedMarginal {
    /// Model with the given coefficients and no fit diagnostics.
    pub fn from_coefficients(
        spec_scale: LinearPredictorSpec,
        scale_coeffs: Vec<f64>,
        spec_shape: LinearPredictorSpec,
        shape_coeffs: Vec<f64>,
    ) -> Self {
        Self {
            family: LifetimeFamily::Weibull,
            scale_coeffs,
            shape_coeffs,
            spec_scale,
            spec_shape,
            neg_loglik: f64::NAN,
            converged: false,
            n_iterations: 0,
            censored_term: CensoredTerm::Survival,
        }
    }

    pub fn needs_partner(&self) -> bool {
        self.spec_scale.include_partner_time || self.spec_shape.include_partner_time
    }

    pub fn max_covariate_index(&self) -> Option<usize> {
        self.spec_scale
            .covariate_indices
            .iter()
            .chain(&self.spec_shape.covariate_indices)
            .copied()
            .max()
    }

    fn check_inputs(&self, z: &[f64], partner: Option<f64>) -> Result<(), MarginError> {
        if let Some(m) = self.max_covariate_index() {
            if m >= z.len() {
                return Err(MarginError::DimensionMismatch(format!(
                    "covariate vector has {} entries, model uses index {m}",
                    z.len()
                )));
            }
        }
        if self.needs_partner() != partner.is_some() {
            return Err(MarginError::DimensionMismatch(
                "partner time must be supplied exactly when the model uses it".into(),
            ));
        }
        Ok(())
    }

    /// Linear predictors without input validation.
    pub fn linear_predictors(&self, z: &[f64], partner: Option<f64>) -> (f64, f64) {
        let dot = |spec: &LinearPredictorSpec, c: &[f64]| -> f64 {
            let mut k = 0;
            let mut acc = 0.0;
            if spec.include_intercept {
                acc += c[0];
                k = 1;
            }
            for &i in &spec.covariate_indices {
                acc += c[k] * z[i];
                k += 1;
            }
            if spec.include_partner_time {
                acc += c[k] * partner.unwrap_or(0.0);
            }
            acc
        };
        (dot(&self.spec_scale, &self.scale_coeffs), dot(&self.spec_shape, &self.shape_coeffs))
    }

    pub fn predict_params(&self, z: &[f64], partner: Option<f64>) -> Result<(f64, f64), MarginError> {
        self.check_inputs(z, partner)?;
        let (es, ek) = self.linear_predictors(z, partner);
        Ok((es.exp(), ek.exp()))
    }

    pub fn conditional_cdf(&self, y: f64, z: &[f64], partner: Option<f64>) -> Result<f64, MarginError> {
        if !(y >= 0.0) {
            return Err(MarginError::InvalidInput(format!("negative time {y}")));
        }
        let (scale, shape) = self.predict_params(z, partner)?;
        Ok(self.family.cdf(y, scale, shape))
    }

    /// CDF at already-validated inputs.
    pub fn cdf_unchecked(&self, y: f64, z: &[f64], partner: Option<f64>) -> f64 {
        let (es, ek) = self.linear_predictors(z, partner);
        self.family.cdf(y, es.exp(), ek.exp())
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = self.scale_coeffs.clone();
        v.extend(&self.shape_coeffs);
        v
    }
}

pub fn predict_params(
    model: &FittedMarginal,
    z: &[f64],
    partner_time: Option<f64>,
) -> Result<(f64, f64), MarginError> {
    model.predict_params(z, partner_time)
}

pub fn conditional_cdf(
    model: &FittedMarginal,
    y: f64,
    z: &[f64],
    partner_time: Option<f64>,
) -> Result<f64, MarginError> {
    model.conditional_cdf(y, z, partner_time)
}

/// Maximum likelihood fit of a censored Weibull regression.
pub fn fit_censored_weibull(
    responses: &[f64],
    deltas: &[bool],
    covariates: &[Vec<f64>],
    partner_times: Option<&[f64]>,
    spec_scale: &LinearPredictorSpec,
    spec_shape: &LinearPredictorSpec,
) -> Result<FittedMarginal, MarginError> {
    fit_censored_weibull_with(
        responses,
        deltas,
        covariates,
        partner_times,
        spec_scale,
        spec_shape,
        &FitOptions::default(),
    )
}

pub fn fit_censored_weibull_with(
    responses: &[f64],
    deltas: &[bool],
    covariates: &[Vec<f64>],
    partner_times: Option<&[f64]>,
    spec_scale: &LinearPredictorSpec,
    spec_shape: &LinearPredictorSpec,
    options: &FitOptions,
) -> Result<FittedMarginal, MarginError> {
    let mut lik =
        CensoredLikelihood::new(responses, deltas, covariates, partner_times, spec_scale, spec_shape)?;
    lik.censored = options.censored;
    let n_obs = deltas.iter().filter(|&&d| d).count();
    if n_obs == 0 {
        return Err(MarginError::NonIdentifiable("no uncensored response".into()));
    }
    let (xs, xk) = lik.uncensored_designs();
    if column_rank(&xs) < lik.n_scale() || column_rank(&xk) < lik.n_shape() {
        return Err(MarginError::NonIdentifiable(
            "design is rank deficient on the uncensored subset".into(),
        ));
    }

    // intercepts from the uncensored subset, slopes at zero
    let mut init = vec![0.0; lik.dim()];
    if spec_scale.include_intercept {
        let m = responses.iter().zip(deltas).filter(|(_, &d)| d).map(|(y, _)| *y).sum::<f64>()
            / n_obs as f64;
        init[0] = m.ln();
    }

    let (std_lik, standardizer) = lik.standardized();
    let start = standardizer.to_standard(&init);
    let outcome = minimize(&std_lik, start, options);
    let coeffs = standardizer.to_original(&outcome.x);
    let (nll, grad) = lik.value_and_gradient(&coeffs);
    let grad_norm = outcome.grad_norm;
    if !outcome.converged {
        return Err(MarginError::Diverged {
            iterations: outcome.iterations,
            grad_norm: grad_norm.max(grad.iter().fold(0.0, |a, g| a.max(g.abs()))),
        });
    }
    let ns = lik.n_scale();
    Ok(FittedMarginal {
        family: lik.family,
        scale_coeffs: coeffs[..ns].to_vec(),
        shape_coeffs: coeffs[ns..].to_vec(),
        spec_scale: spec_scale.clone(),
        spec_shape: spec_shape.clone(),
        neg_loglik: nll,
        converged: true,
        n_iterations: outcome.iterations,
        censored_term: options.censored,
    })
}

struct Outcome {
    x: Vec<f64>,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, g| a.max(g.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking; damped Newton steps when the line search
/// cannot make progress.
fn minimize(lik: &CensoredLikelihood, x0: Vec<f64>, options: &FitOptions) -> Outcome {
    let d = x0.len();
    let mut x = x0;
    let (mut f, mut g) = lik.value_and_gradient(&x);
    if d == 0 {
        return Outcome { x, converged: true, iterations: 0, grad_norm: 0.0 };
    }
    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..d).map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
    };
    let mut hinv = identity(1.0 / (1.0 + max_abs(&g)));
    let mut iter = 0;
    while iter < options.max_iter {
        if max_abs(&g) < options.grad_tol {
            return Outcome { x, converged: true, iterations: iter, grad_norm: max_abs(&g) };
        }
        iter += 1;
        let mut p: Vec<f64> = (0..d).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            hinv = identity(1.0 / (1.0 + max_abs(&g)));
            p = g.iter().map(|v| -v * hinv[0][0]).collect();
            slope = dot(&g, &p);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            let (fn_, gn) = lik.value_and_gradient(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * t * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            match newton_step(lik, &x, f, &g) {
                Some((xn, fn_, gn)) => {
                    x = xn;
                    f = fn_;
                    g = gn;
                    hinv = identity(1.0 / (1.0 + max_abs(&g)));
                    continue;
                }
                None => break,
            }
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if iter == 1 {
                hinv = identity(sy / dot(&y, &y));
            }
            let hy: Vec<f64> = (0..d).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..d {
                for j in 0..d {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x = xn;
        f = fn_;
        g = gn;
    }
    // polish with Newton if BFGS stopped short
    for _ in 0..20 {
        if max_abs(&g) < options.grad_tol {
            break;
        }
        match newton_step(lik, &x, f, &g) {
            Some((xn, fn_, gn)) => {
                x = xn;
                f = fn_;
                g = gn;
            }
            None => break,
        }
    }
    let gn = max_abs(&g);
    Outcome { x, converged: gn < options.grad_tol, iterations: iter, grad_norm: gn }
}

fn newton_step(
    lik: &CensoredLikelihood,
    x: &[f64],
    f: f64,
    g: &[f64],
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let h = lik.hessian(x);
    let mut damping = 0.0;
    for _ in 0..12 {
        let mut a = h.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += damping;
        }
        if let Some(step) = solve(a, g.iter().map(|v| -v).collect()) {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let (fn_, gn) = lik.value_and_gradient(&xn);
            if fn_.is_finite() && (fn_ <= f || max_abs(&gn) < max_abs(g)) {
                return Some((xn, fn_, gn));
            }
        }
        damping = if damping == 0.0 { 1e-6 * (1.0 + max_abs(g)) } else { damping * 10.0 };
    }
    None
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Inverse of a symmetric positive-definite matrix (observed information ->
/// covariance), by solving against unit vectors.
pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        cols.push(solve(a.to_vec(), e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}
