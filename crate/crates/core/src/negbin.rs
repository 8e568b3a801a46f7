//! Negative binomial (NB2) and Poisson regression by maximum likelihood.
//!
//! With `μ_j = exp(x_j·β)`, `m = 1/α` and `p_j = 1/(1 + α μ_j)` the
//! log-likelihood is
//!
//! ```text
//! lnL = Σ_j [ lnΓ(m + y_j) − lnΓ(y_j + 1) − lnΓ(m) + m ln p_j + y_j ln(1 − p_j) ]
//! ```
//!
//! so that `Var(y) = μ + α μ²` and `α → 0` recovers the Poisson model. The
//! fit runs BFGS over `(β, ln α)` starting from the Poisson estimate with
//! `ln α = 0`. Standard errors come from the observed information (the
//! analytic Hessian) at the optimum.
//!
//! Linear predictors are clipped to `±30` before exponentiation; clipped
//! rows are counted and logged.

use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::optim::{self, BfgsOptions};
use crate::special::{digamma_diff_scaled, log_rising_scaled, trigamma_diff_scaled};

/// Linear predictors beyond this magnitude are clipped.
pub const ETA_CLIP: f64 = 30.0;
/// Normalized Gram eigenvalue ratio below which a design counts as singular.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("dispersion must be positive and finite, got {0}")]
    Domain(f64),
    #[error("non-finite linear predictor at row {row}")]
    Overflow { row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("need more than {params} observations, got {n}")]
    InsufficientData { n: usize, params: usize },
    #[error("Hessian is not negative definite at the reported optimum")]
    NonconcaveAtOptimum,
    #[error("fits were computed on different data")]
    IncompatibleFits,
    #[error("{0} fit did not converge")]
    NotConverged(&'static str),
}

impl FitError {
    pub fn kind(&self) -> &'static str {
        match self {
            FitError::Domain(_) => "domain",
            FitError::Overflow { .. } => "overflow",
            FitError::Dimension(_) => "dimension",
            FitError::SingularDesign => "singular_design",
            FitError::InsufficientData { .. } => "insufficient_data",
            FitError::NonconcaveAtOptimum => "nonconcave_at_optimum",
            FitError::IncompatibleFits => "incompatible_fits",
            FitError::NotConverged(_) => "not_converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Converged once the max-abs gradient is below `tol * max(1, |lnL|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Identifies the `(y, X)` a fit was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DesignKey(u64);

impl DesignKey {
    fn of(y: &[u64], x: &DMatrix<f64>) -> Self {
        let mut h = DefaultHasher::new();
        y.hash(&mut h);
        (x.nrows(), x.ncols()).hash(&mut h);
        for v in x.iter() {
            v.to_bits().hash(&mut h);
        }
        DesignKey(h.finish())
    }
}

/// A fitted negative binomial regression.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub alpha: f64,
    /// Standard error of `α`, by the delta method from `ln α`.
    pub alpha_se: f64,
    pub log_alpha_se: f64,
    pub se: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub p_values: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Max-abs score over `(β, ln α)` at the returned point.
    pub gradient_norm_at_opt: f64,
    /// Inverse observed information over `(β, ln α)`.
    pub covariance: DMatrix<f64>,
    pub clipped_rows: usize,
    design: DesignKey,
}

impl FitResult {
    /// Number of estimated parameters, counting the dispersion.
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }

    /// Covariance of the coefficients alone.
    pub fn beta_covariance(&self) -> DMatrix<f64> {
        let p = self.coefficients.len();
        self.covariance.view((0, 0), (p, p)).into_owned()
    }

    /// Fitted means `exp(x_j·β)` (with the usual clipping).
    pub fn fitted_means(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|e| e.clamp(-ETA_CLIP, ETA_CLIP).exp()).collect()
    }
}

/// `AIC = 2k − 2 lnL`.
pub fn aic(n_params: usize, loglik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

#[derive(Debug, Clone)]
pub struct PoissonFit {
    pub coefficients: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    design: DesignKey,
}

fn check_dims(y: &[u64], x: &DMatrix<f64>, beta: Option<&[f64]>) -> Result<(), FitError> {
    if x.nrows() != y.len() {
        return Err(FitError::Dimension(format!(
            "{} responses but {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if let Some(beta) = beta {
        if beta.len() != x.ncols() {
            return Err(FitError::Dimension(format!(
                "{} coefficients but {} columns",
                beta.len(),
                x.ncols()
            )));
        }
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), FitError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(FitError::Domain(alpha))
    }
}

/// Linear predictors, clipped to `±ETA_CLIP`, with the number clipped.
fn linear_predictor(x: &DMatrix<f64>, beta: &[f64]) -> Result<(Vec<f64>, Vec<bool>), FitError> {
    let eta = x * DVector::from_column_slice(beta);
    let mut clipped = vec![false; eta.len()];
    let mut out = Vec::with_capacity(eta.len());
    for (row, &e) in eta.iter().enumerate() {
        if !e.is_finite() {
            return Err(FitError::Overflow { row });
        }
        if e.abs() > ETA_CLIP {
            clipped[row] = true;
            out.push(e.clamp(-ETA_CLIP, ETA_CLIP));
        } else {
            out.push(e);
        }
    }
    Ok((out, clipped))
}

/// Rejects designs whose column-normalized Gram matrix is numerically
/// singular (zero columns, duplicated or collinear columns).
pub fn check_full_rank(x: &DMatrix<f64>) -> Result<(), FitError> {
    if x.ncols() == 0 || x.nrows() < x.ncols() {
        return Err(FitError::SingularDesign);
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(FitError::SingularDesign);
    }
    let mut gram = x.transpose() * x;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            gram[(i, j)] /= norms[i] * norms[j];
        }
    }
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(min > RANK_TOL * max) {
        return Err(FitError::SingularDesign);
    }
    Ok(())
}

struct NbEval {
    loglik: f64,
    score: DVector<f64>,
    hessian: Option<DMatrix<f64>>,
    clipped: usize,
}

fn nb_evaluate(
    y: &[u64],
    x: &DMatrix<f64>,
    beta: &[f64],
    alpha: f64,
    want_hessian: bool,
) -> Result<NbEval, FitError> {
    check_dims(y, x, Some(beta))?;
    check_alpha(alpha)?;
    let (eta, clipped) = linear_predictor(x, beta)?;
    let n = y.len();
    let p = x.ncols();
    let a = alpha;
    let m = 1.0 / a;

    let mut loglik = 0.0;
    let mut d_eta = DVector::zeros(n);
    let mut d_lna = 0.0;
    let mut h_ee = DVector::zeros(if want_hessian { n } else { 0 });
    let mut h_ea = DVector::zeros(if want_hessian { n } else { 0 });
    let mut h_aa = 0.0;

    for j in 0..n {
        let yj = y[j];
        let yf = yj as f64;
        let mu = eta[j].exp();
        let q = 1.0 + a * mu;
        let l = (a * mu).ln_1p();
        loglik += log_rising_scaled(yj, a) - ln_gamma(yf + 1.0) + yf * eta[j] - (m + yf) * l;

        let resid = (yf - mu) / q;
        let live = !clipped[j];
        if live {
            d_eta[j] = resid;
        }
        let l_minus_d = l / a - digamma_diff_scaled(yj, a);
        d_lna += l_minus_d + resid;

        if want_hessian {
            if live {
                h_ee[j] = -mu * (1.0 + a * yf) / (q * q);
                h_ea[j] = -a * mu * (yf - mu) / (q * q);
            }
            h_aa += mu / q - trigamma_diff_scaled(yj, a) - l_minus_d - a * (yf - mu) * mu / (q * q);
        }
    }

    let mut score = DVector::zeros(p + 1);
    score.rows_mut(0, p).copy_from(&(x.transpose() * &d_eta));
    score[p] = d_lna;

    let hessian = want_hessian.then(|| {
        let mut h = DMatrix::zeros(p + 1, p + 1);
        let mut weighted = x.clone();
        for (j, mut row) in weighted.row_iter_mut().enumerate() {
            row *= h_ee[j];
        }
        h.view_mut((0, 0), (p, p)).copy_from(&(x.transpose() * weighted));
        let cross = x.transpose() * &h_ea;
        for i in 0..p {
            h[(i, p)] = cross[i];
            h[(p, i)] = cross[i];
        }
        h[(p, p)] = h_aa;
        h
    });

    Ok(NbEval {
        loglik,
        score,
        hessian,
        clipped: clipped.iter().filter(|&&c| c).count(),
    })
}

fn warn_clipped(clipped: usize) {
    if clipped > 0 {
        log::warn!("{clipped} linear predictors clipped to ±{ETA_CLIP}");
    }
}

/// Negative binomial log-likelihood of `y` given `X`, `β` and `α`.
pub fn nb_loglik(y: &[u64], x: &DMatrix<f64>, beta: &[f64], alpha: f64) -> Result<f64, FitError> {
    let ev = nb_evaluate(y, x, beta, alpha, false)?;
    warn_clipped(ev.clipped);
    Ok(ev.loglik)
}

/// Analytic gradient of [`nb_loglik`] over `(β, ln α)`; the last entry is
/// the `ln α` component.
pub fn nb_score(y: &[u64], x: &DMatrix<f64>, beta: &[f64], alpha: f64) -> Result<Vec<f64>, FitError> {
    let ev = nb_evaluate(y, x, beta, alpha, false)?;
    warn_clipped(ev.clipped);
    Ok(ev.score.iter().copied().collect())
}

/// Analytic Hessian of [`nb_loglik`] over `(β, ln α)`.
pub fn nb_hessian(y: &[u64], x: &DMatrix<f64>, beta: &[f64], alpha: f64) -> Result<DMatrix<f64>, FitError> {
    let ev = nb_evaluate(y, x, beta, alpha, true)?;
    warn_clipped(ev.clipped);
    Ok(ev.hessian.expect("requested"))
}

/// Poisson log-likelihood, including the `−lnΓ(y+1)` terms.
pub fn poisson_loglik(y: &[u64], x: &DMatrix<f64>, beta: &[f64]) -> Result<f64, FitError> {
    check_dims(y, x, Some(beta))?;
    let (eta, _) = linear_predictor(x, beta)?;
    Ok(poisson_ll_from_eta(y, &eta))
}

fn poisson_ll_from_eta(y: &[u64], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&yj, &e)| {
            let yf = yj as f64;
            yf * e - e.exp() - ln_gamma(yf + 1.0)
        })
        .sum()
}

/// Poisson regression with log link by iteratively reweighted least squares.
pub fn fit_poisson(y: &[u64], x: &DMatrix<f64>) -> Result<PoissonFit, FitError> {
    fit_poisson_with(y, x, 100)
}

pub fn fit_poisson_with(y: &[u64], x: &DMatrix<f64>, max_iter: usize) -> Result<PoissonFit, FitError> {
    check_dims(y, x, None)?;
    check_full_rank(x)?;
    let n = y.len();
    let ybar = y.iter().sum::<u64>() as f64 / n as f64;
    let mut eta: Vec<f64> = y
        .iter()
        .map(|&v| ((v as f64 + ybar) / 2.0).max(0.1).ln())
        .collect();
    let mut beta: Option<DVector<f64>> = None;
    let mut loglik = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut xtwx = DMatrix::<f64>::zeros(x.ncols(), x.ncols());
        let mut xtwz = DVector::<f64>::zeros(x.ncols());
        let mut weighted = x.clone();
        let mut wz = DVector::zeros(n);
        for j in 0..n {
            let mu = eta[j].exp();
            let z = eta[j] + (y[j] as f64 - mu) / mu;
            let w = mu;
            let mut row = weighted.row_mut(j);
            row *= w;
            wz[j] = w * z;
        }
        xtwx += x.transpose() * &weighted;
        xtwz += x.transpose() * &wz;
        let chol = xtwx.cholesky().ok_or(FitError::SingularDesign)?;
        let mut proposal = chol.solve(&xtwz);

        // step halving keeps the likelihood from decreasing
        let mut accepted = None;
        for _ in 0..30 {
            let (eta_new, _) = linear_predictor(x, proposal.as_slice())?;
            let ll_new = poisson_ll_from_eta(y, &eta_new);
            if ll_new.is_finite() && (beta.is_none() || ll_new >= loglik - 1e-10 * loglik.abs()) {
                accepted = Some((eta_new, ll_new));
                break;
            }
            let prev = beta.as_ref().expect("first iterate always accepted when finite");
            proposal = (&proposal + prev) * 0.5;
        }
        let Some((eta_new, ll_new)) = accepted else {
            break;
        };
        let change = (ll_new - loglik).abs();
        let first = beta.is_none();
        eta = eta_new;
        beta = Some(proposal);
        let prev_ll = loglik;
        loglik = ll_new;
        if !first && change <= 1e-12 * (1.0 + loglik.abs()) && loglik >= prev_ll - 1e-9 * loglik.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Poisson IRLS stopped after {iterations} iterations without converging");
    }
    let beta = beta.ok_or(FitError::Overflow { row: 0 })?;
    Ok(PoissonFit {
        coefficients: beta.iter().copied().collect(),
        loglik,
        iterations,
        converged,
        design: DesignKey::of(y, x),
    })
}

/// Two-sided normal tail probability `P(|Z| > |z|)`.
pub fn wald_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Fits the negative binomial regression of `y` on `X`.
pub fn fit_negbin(y: &[u64], x: &DMatrix<f64>, options: &FitOptions) -> Result<FitResult, FitError> {
    check_dims(y, x, None)?;
    let p = x.ncols();
    if y.len() <= p + 1 {
        return Err(FitError::InsufficientData {
            n: y.len(),
            params: p + 1,
        });
    }
    check_full_rank(x)?;
    let pois = fit_poisson(y, x)?;

    let mut theta0 = DVector::zeros(p + 1);
    theta0.rows_mut(0, p).copy_from_slice(&pois.coefficients);
    let h0 = nb_evaluate(y, x, &pois.coefficients, 1.0, true)
        .ok()
        .and_then(|ev| (-ev.hessian.expect("requested")).cholesky())
        .map(|c| c.inverse());

    let mut objective = |theta: &DVector<f64>| {
        let alpha = theta[p].exp();
        nb_evaluate(y, x, &theta.as_slice()[..p], alpha, false)
            .ok()
            .map(|ev| (-ev.loglik, -ev.score))
    };
    let outcome = optim::minimize(
        &mut objective,
        theta0,
        h0,
        &BfgsOptions {
            tol: options.tol,
            max_iter: options.max_iter,
        },
    )
    .ok_or(FitError::Overflow { row: 0 })?;

    let beta: Vec<f64> = outcome.x.as_slice()[..p].to_vec();
    let alpha = outcome.x[p].exp();
    let ev = nb_evaluate(y, x, &beta, alpha, true)?;
    warn_clipped(ev.clipped);
    let gradient_norm_at_opt = ev.score.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let converged = outcome.converged && gradient_norm_at_opt < options.tol * ev.loglik.abs().max(1.0);
    if !converged {
        log::warn!(
            "negative binomial fit stopped after {} iterations, gradient {gradient_norm_at_opt:e}",
            outcome.iterations
        );
    }

    let neg_hessian = -ev.hessian.expect("requested");
    let covariance = match neg_hessian.cholesky() {
        Some(chol) => chol.inverse(),
        None if converged => return Err(FitError::NonconcaveAtOptimum),
        None => DMatrix::from_element(p + 1, p + 1, f64::NAN),
    };
    let se: Vec<f64> = (0..p).map(|i| covariance[(i, i)].sqrt()).collect();
    let z_scores: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_values = z_scores.iter().map(|&z| wald_p_value(z)).collect();
    let log_alpha_se = covariance[(p, p)].sqrt();

    Ok(FitResult {
        alpha,
        alpha_se: alpha * log_alpha_se,
        log_alpha_se,
        se,
        z_scores,
        p_values,
        loglik: ev.loglik,
        aic: aic(p + 1, ev.loglik),
        n: y.len(),
        iterations: outcome.iterations,
        converged,
        gradient_norm_at_opt,
        covariance,
        clipped_rows: ev.clipped,
        coefficients: beta,
        design: DesignKey::of(y, x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Likelihood-ratio test of `α = 0`. The statistic `2(lnL_NB − lnL_Poisson)`
/// is clamped at zero and referred to the boundary mixture
/// `½χ²₀ + ½χ²₁`, so a zero statistic has p-value 0.5.
pub fn lr_overdispersion(nb: &FitResult, pois: &PoissonFit) -> Result<LrTest, FitError> {
    if nb.design != pois.design {
        return Err(FitError::IncompatibleFits);
    }
    if !nb.converged {
        return Err(FitError::NotConverged("negative binomial"));
    }
    if !pois.converged {
        return Err(FitError::NotConverged("Poisson"));
    }
    let statistic = (2.0 * (nb.loglik - pois.loglik)).max(0.0);
    Ok(LrTest {
        statistic,
        p_value: boundary_chi2_p_value(statistic),
    })
}

/// `½ P(χ²₁ > s)` for `s > 0`, and 0.5 at `s = 0`.
pub fn boundary_chi2_p_value(statistic: f64) -> f64 {
    0.5 * erfc((statistic.max(0.0) / 2.0).sqrt())
}

/// JSON form of a fit: `{candidate, columns, beta, se, z, p, alpha, loglik,
/// aic, n, converged, iterations}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub candidate: String,
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: f64,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FitReport {
    pub fn new(candidate: &str, columns: &[String], fit: &FitResult) -> Self {
        FitReport {
            candidate: candidate.to_string(),
            columns: columns.to_vec(),
            beta: fit.coefficients.clone(),
            se: fit.se.clone(),
            z: fit.z_scores.clone(),
            p: fit.p_values.clone(),
            alpha: fit.alpha,
            loglik: fit.loglik,
            aic: fit.aic,
            n: fit.n,
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }
}

/// Dispersion details and the over-dispersion test for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub candidate: String,
    pub alpha: f64,
    pub alpha_se: f64,
    pub log_alpha: f64,
    pub log_alpha_se: f64,
    pub nb_loglik: f64,
    pub poisson_loglik: f64,
    pub lr_statistic: f64,
    pub lr_p_value: f64,
}

impl DispersionReport {
    pub fn new(candidate: &str, nb: &FitResult, pois: &PoissonFit, lr: &LrTest) -> Self {
        DispersionReport {
            candidate: candidate.to_string(),
            alpha: nb.alpha,
            alpha_se: nb.alpha_se,
            log_alpha: nb.alpha.ln(),
            log_alpha_se: nb.log_alpha_se,
            nb_loglik: nb.loglik,
            poisson_loglik: pois.loglik,
            lr_statistic: lr.statistic,
            lr_p_value: lr.p_value,
        }
    }
}
