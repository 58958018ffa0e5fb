//! Log marginal likelihoods log p(y | γ, τ) on the natural-log scale.
//!
//! Terms that depend only on n, a_σ and b_σ are dropped everywhere.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EssError, Result};
use crate::linalg::{cholesky, cholesky_log_det, cholesky_solve, dot, PivotedQr, ThinQr};
use crate::model::ModelIndicator;
use crate::priors::{PriorFamily, PriorSpec};

/// g-prior models larger than this are updated in place on single flips.
pub const UPDATE_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMarginal {
    pub value: f64,
    pub s_gamma: f64,
    pub p_gamma: usize,
    pub tau: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(EssError::numeric(format!("tau must be positive and finite, got {tau}")))
    }
}

fn sigma_exponent(n: usize, a_sigma: f64) -> f64 {
    (2.0 * a_sigma + n as f64 - 1.0) / 2.0
}

fn log_residual_term(n: usize, a_sigma: f64, b_sigma: f64, s: f64) -> Result<f64> {
    let d = 2.0 * b_sigma + s;
    if !(d > 0.0) || !d.is_finite() {
        return Err(EssError::numeric(format!("2*b_sigma + S(gamma) = {d} is not positive")));
    }
    Ok(-sigma_exponent(n, a_sigma) * d.ln())
}

fn gather(ds: &Dataset, idx: &[usize], extra_rows: usize) -> Vec<f64> {
    let m = ds.n() + extra_rows;
    let mut panel = vec![0.0; m * idx.len()];
    for (c, &j) in idx.iter().enumerate() {
        panel[c * m..c * m + ds.n()].copy_from_slice(ds.column(j));
    }
    panel
}

/// yᵀX_γ(X_γᵀX_γ)⁻¹X_γᵀy by pivoted QR. Pivoted-out directions contribute
/// nothing; for p_γ ≥ n the full yᵀy is returned.
pub fn gprior_projection(gamma: &ModelIndicator, ds: &Dataset) -> f64 {
    let k = gamma.size();
    let n = ds.n();
    if k == 0 {
        0.0
    } else if k >= n {
        ds.yty()
    } else {
        PivotedQr::factor(gather(ds, gamma.indices(), 0), n, k, true).projection_sq(ds.y())
    }
}

fn gprior_s(yty: f64, proj: f64, tau: f64) -> f64 {
    (yty - tau / (1.0 + tau) * proj).max(0.0)
}

/// S(γ) under the g-prior with zero prior mean.
pub fn s_gamma_gprior(gamma: &ModelIndicator, tau: f64, ds: &Dataset) -> Result<f64> {
    check_tau(tau)?;
    Ok(gprior_s(ds.yty(), gprior_projection(gamma, ds), tau))
}

fn gprior_from_projection(
    proj: f64,
    p_gamma: usize,
    tau: f64,
    ds: &Dataset,
    a_sigma: f64,
    b_sigma: f64,
) -> Result<LogMarginal> {
    check_tau(tau)?;
    let s = gprior_s(ds.yty(), proj, tau);
    let value = -(p_gamma as f64) / 2.0 * tau.ln_1p() + log_residual_term(ds.n(), a_sigma, b_sigma, s)?;
    Ok(LogMarginal { value, s_gamma: s, p_gamma, tau })
}

pub fn log_marginal_gprior(
    gamma: &ModelIndicator,
    tau: f64,
    ds: &Dataset,
    a_sigma: f64,
    b_sigma: f64,
) -> Result<LogMarginal> {
    check_tau(tau)?;
    gprior_from_projection(gprior_projection(gamma, ds), gamma.size(), tau, ds, a_sigma, b_sigma)
}

/// (S(γ), log|X_γᵀX_γ + τ⁻¹I|) from the QR of X_γ stacked over τ^(−1/2)·I.
fn indep_terms(gamma: &ModelIndicator, tau: f64, ds: &Dataset) -> (f64, f64) {
    let k = gamma.size();
    if k == 0 {
        return (ds.yty(), 0.0);
    }
    let n = ds.n();
    let m = n + k;
    let mut panel = gather(ds, gamma.indices(), k);
    let ridge = tau.recip().sqrt();
    for c in 0..k {
        panel[c * m + n + c] = ridge;
    }
    let qr = PivotedQr::factor(panel, m, k, false);
    let mut ya = vec![0.0; m];
    ya[..n].copy_from_slice(ds.y());
    let proj = qr.projection_sq(&ya);
    let log_det = qr.r_diag().map(|r| 2.0 * r.abs().ln()).sum();
    ((ds.yty() - proj).max(0.0), log_det)
}

/// Independent prior, Σ_γ = τI.
pub fn log_marginal_indep(
    gamma: &ModelIndicator,
    tau: f64,
    ds: &Dataset,
    a_sigma: f64,
    b_sigma: f64,
) -> Result<LogMarginal> {
    check_tau(tau)?;
    let k = gamma.size();
    let (s, log_det) = indep_terms(gamma, tau, ds);
    let value = -(k as f64) / 2.0 * tau.ln() - 0.5 * log_det
        + log_residual_term(ds.n(), a_sigma, b_sigma, s)?;
    Ok(LogMarginal { value, s_gamma: s, p_gamma: k, tau })
}

/// Conjugate marginal for an arbitrary prior covariance `sigma` (k × k,
/// column-major) and prior mean `m`, by dense linear algebra. The returned
/// `tau` field is NaN.
pub fn log_marginal_generic(
    gamma: &ModelIndicator,
    sigma: &[f64],
    m: &[f64],
    ds: &Dataset,
    a_sigma: f64,
    b_sigma: f64,
) -> Result<LogMarginal> {
    let k = gamma.size();
    if sigma.len() != k * k || m.len() != k {
        return Err(EssError::Dimension(format!(
            "prior covariance must be {k}x{k} and mean length {k}"
        )));
    }
    let mut l_sigma = sigma.to_vec();
    if !cholesky(&mut l_sigma, k) {
        return Err(EssError::numeric("prior covariance is not positive definite"));
    }
    let mut sigma_inv = vec![0.0; k * k];
    for c in 0..k {
        let col = &mut sigma_inv[c * k..(c + 1) * k];
        col[c] = 1.0;
        cholesky_solve(&l_sigma, k, col);
    }
    let cols: Vec<&[f64]> = gamma.indices().iter().map(|&j| ds.column(j)).collect();
    let mut kmat = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            kmat[j * k + i] = dot(cols[i], cols[j]) + sigma_inv[j * k + i];
        }
    }
    let sinv_m: Vec<f64> = (0..k).map(|i| (0..k).map(|j| sigma_inv[j * k + i] * m[j]).sum()).collect();
    let mvec: Vec<f64> = (0..k).map(|i| dot(cols[i], ds.y()) + sinv_m[i]).collect();
    let c = dot(ds.y(), ds.y()) + dot(m, &sinv_m);
    let mut l_k = kmat;
    if !cholesky(&mut l_k, k) {
        return Err(EssError::numeric("posterior precision is not positive definite"));
    }
    let mut kinv_m = mvec.clone();
    cholesky_solve(&l_k, k, &mut kinv_m);
    let s = c - dot(&mvec, &kinv_m);
    let value = -0.5 * cholesky_log_det(&l_k, k) - 0.5 * cholesky_log_det(&l_sigma, k)
        + log_residual_term(ds.n(), a_sigma, b_sigma, s)?;
    Ok(LogMarginal { value, s_gamma: s, p_gamma: k, tau: f64::NAN })
}

/// R²_γ = 1 − S(γ)/yᵀy under the given family.
pub fn r_squared(gamma: &ModelIndicator, tau: f64, ds: &Dataset, family: PriorFamily) -> Result<f64> {
    if !(ds.yty() > 0.0) {
        return Err(EssError::numeric("response has zero sum of squares"));
    }
    check_tau(tau)?;
    let s = match family {
        PriorFamily::GPrior => s_gamma_gprior(gamma, tau, ds)?,
        PriorFamily::Independent => indep_terms(gamma, tau, ds).0,
    };
    Ok(1.0 - s / ds.yty())
}

/// τ-free part of a model's fit, cached per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelFit {
    /// yᵀP_γy for the g-prior; unused for the independent family.
    pub proj: f64,
    qr: Option<ThinQr>,
    order: Vec<usize>,
}

impl ModelFit {
    pub fn has_update_factor(&self) -> bool {
        self.qr.is_some()
    }
}

/// Marginal-likelihood evaluation bound to a dataset and prior family.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    ds: &'a Dataset,
    family: PriorFamily,
    a_sigma: f64,
    b_sigma: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(ds: &'a Dataset, spec: &PriorSpec) -> Self {
        Evaluator { ds, family: spec.family, a_sigma: spec.a_sigma, b_sigma: spec.b_sigma }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    fn gprior_fit(&self, gamma: &ModelIndicator) -> ModelFit {
        let k = gamma.size();
        let n = self.ds.n();
        if k > UPDATE_THRESHOLD && k < n {
            let cols = gamma.indices().iter().map(|&j| self.ds.column(j));
            if let Some(qr) = ThinQr::from_columns(n, cols) {
                let proj = qr.projection_sq(self.ds.y());
                return ModelFit { proj, qr: Some(qr), order: gamma.indices().to_vec() };
            }
        }
        ModelFit { proj: gprior_projection(gamma, self.ds), qr: None, order: Vec::new() }
    }

    /// Evaluate from scratch.
    pub fn evaluate(&self, gamma: &ModelIndicator, tau: f64) -> Result<(LogMarginal, ModelFit)> {
        match self.family {
            PriorFamily::GPrior => {
                let fit = self.gprior_fit(gamma);
                let lm = gprior_from_projection(fit.proj, gamma.size(), tau, self.ds, self.a_sigma, self.b_sigma)?;
                Ok((lm, fit))
            }
            PriorFamily::Independent => {
                let lm = log_marginal_indep(gamma, tau, self.ds, self.a_sigma, self.b_sigma)?;
                Ok((lm, ModelFit::default()))
            }
        }
    }

    /// Evaluate `new_gamma`, which differs from the model behind `old_fit`
    /// only at index `j`.
    pub fn evaluate_flip(
        &self,
        new_gamma: &ModelIndicator,
        old_fit: &ModelFit,
        j: usize,
        tau: f64,
    ) -> Result<(LogMarginal, ModelFit)> {
        let k = new_gamma.size();
        if self.family == PriorFamily::GPrior && k > UPDATE_THRESHOLD && k < self.ds.n() {
            if let Some(qr) = &old_fit.qr {
                let mut qr = qr.clone();
                let mut order = old_fit.order.clone();
                let ok = if new_gamma.contains(j) {
                    order.push(j);
                    qr.append_column(self.ds.column(j))
                } else if let Some(pos) = order.iter().position(|&c| c == j) {
                    order.remove(pos);
                    qr.remove_column(pos);
                    true
                } else {
                    false
                };
                if ok {
                    let proj = qr.projection_sq(self.ds.y());
                    let lm = gprior_from_projection(proj, k, tau, self.ds, self.a_sigma, self.b_sigma)?;
                    return Ok((lm, ModelFit { proj, qr: Some(qr), order }));
                }
            }
        }
        self.evaluate(new_gamma, tau)
    }

    /// Re-evaluate a cached model at a new τ. O(1) for the g-prior.
    pub fn at_tau(&self, gamma: &ModelIndicator, fit: &ModelFit, tau: f64) -> Result<LogMarginal> {
        match self.family {
            PriorFamily::GPrior => {
                gprior_from_projection(fit.proj, gamma.size(), tau, self.ds, self.a_sigma, self.b_sigma)
            }
            PriorFamily::Independent => log_marginal_indep(gamma, tau, self.ds, self.a_sigma, self.b_sigma),
        }
    }

    pub fn r_squared(&self, gamma: &ModelIndicator, tau: f64) -> Result<f64> {
        r_squared(gamma, tau, self.ds, self.family)
    }
}
