//! Model-space prior (beta-binomial) and hyperpriors on τ.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{EssError, Result};
use crate::model::ModelIndicator;

/// a_ω + b_ω used when the elicited variance is the binomial one.
pub const BINOMIAL_LIMIT_SCALE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorFamily {
    /// Σ_γ = τ (X_γᵀX_γ)⁻¹
    GPrior,
    /// Σ_γ = τ I
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauMode {
    Fixed(f64),
    /// τ ~ InvGa(a_τ, b_τ)
    ZellnerSiow { a_tau: f64, b_tau: f64 },
    /// p(τ) ∝ (1+τ)^(−c_τ)
    HyperG { c_tau: f64 },
}

impl TauMode {
    pub fn zellner_siow_default(n: usize) -> Self {
        TauMode::ZellnerSiow { a_tau: 0.5, b_tau: n as f64 / 2.0 }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, TauMode::Fixed(_))
    }

    /// Hyper-g with c_τ ≤ 1 does not integrate.
    pub fn is_proper(&self) -> bool {
        match *self {
            TauMode::HyperG { c_tau } => c_tau > 1.0,
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TauMode::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                Err(EssError::config(format!("fixed tau must be positive, got {t}")))
            }
            TauMode::ZellnerSiow { a_tau, b_tau } if !(a_tau > 0.0 && b_tau > 0.0) => {
                Err(EssError::config("Zellner-Siow a_tau and b_tau must be positive"))
            }
            TauMode::HyperG { c_tau } if !(c_tau > 0.0) => {
                Err(EssError::config("hyper-g c_tau must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub tau_mode: TauMode,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub a_omega: f64,
    pub b_omega: f64,
}

impl PriorSpec {
    pub fn new(family: PriorFamily, tau_mode: TauMode, omega: OmegaHyper) -> Self {
        PriorSpec {
            family,
            tau_mode,
            a_sigma: 1e-6,
            b_sigma: 1e-3,
            a_omega: omega.a,
            b_omega: omega.b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tau_mode.validate()?;
        if !(self.a_sigma >= 0.0 && self.b_sigma >= 0.0) {
            return Err(EssError::config("a_sigma and b_sigma must be non-negative"));
        }
        if !(self.a_omega > 0.0 && self.b_omega > 0.0) {
            return Err(EssError::config("a_omega and b_omega must be positive"));
        }
        Ok(())
    }

    /// (2a_σ + n − 1)/2, the exponent on 2b_σ + S(γ).
    pub fn sigma_exponent(&self, n: usize) -> f64 {
        (2.0 * self.a_sigma + n as f64 - 1.0) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaHyper {
    pub a: f64,
    pub b: f64,
    /// Set when the elicited variance is the binomial one and a+b was capped.
    pub binomial_limit: bool,
}

/// Solve the beta-binomial moment equations for (a_ω, b_ω) given E(p_γ), V(p_γ).
pub fn elicit_omega_hyperparams(e_pgamma: f64, v_pgamma: f64, p: usize) -> Result<OmegaHyper> {
    let pf = p as f64;
    if !(e_pgamma > 0.0 && e_pgamma < pf) {
        return Err(EssError::config(format!("E(p_gamma) must lie in (0, {p}), got {e_pgamma}")));
    }
    if !(v_pgamma > 0.0) {
        return Err(EssError::config("V(p_gamma) must be positive"));
    }
    let mu = e_pgamma / pf;
    let binom = pf * mu * (1.0 - mu);
    let upper = pf * binom;
    let r = v_pgamma / binom;
    if (r - 1.0).abs() <= 1e-9 {
        let s = BINOMIAL_LIMIT_SCALE;
        return Ok(OmegaHyper { a: mu * s, b: (1.0 - mu) * s, binomial_limit: true });
    }
    if r < 1.0 || r >= pf {
        return Err(EssError::config(format!(
            "V(p_gamma)={v_pgamma} infeasible for a beta-binomial with E={e_pgamma}, p={p}: \
             need {binom} <= V < {upper}"
        )));
    }
    let s = (pf - r) / (r - 1.0);
    let (a, b) = (mu * s, (1.0 - mu) * s);
    if s > BINOMIAL_LIMIT_SCALE {
        let s = BINOMIAL_LIMIT_SCALE;
        return Ok(OmegaHyper { a: mu * s, b: (1.0 - mu) * s, binomial_limit: true });
    }
    Ok(OmegaHyper { a, b, binomial_limit: false })
}

/// log p(γ) under the beta-binomial prior, for a model of size `p_gamma`.
pub fn log_model_prior_size(p_gamma: usize, spec: &PriorSpec, p: usize) -> f64 {
    let k = p_gamma as f64;
    ln_beta(k + spec.a_omega, p as f64 - k + spec.b_omega) - ln_beta(spec.a_omega, spec.b_omega)
}

pub fn log_model_prior(gamma: &ModelIndicator, spec: &PriorSpec, p: usize) -> f64 {
    log_model_prior_size(gamma.size(), spec, p)
}

/// θ⁽¹⁾ = (p_γ + a_ω − 1)/(p + a_ω + b_ω − 1), where `p_gamma` counts the
/// model with the index under consideration switched on. This is the exact
/// conditional p(γ_j = 1 | γ_{−j}).
pub fn theta_one(p_gamma: usize, p: usize, spec: &PriorSpec) -> f64 {
    (p_gamma as f64 + spec.a_omega - 1.0) / (p as f64 + spec.a_omega + spec.b_omega - 1.0)
}

/// Tempered, renormalized θ̃⁽¹⁾(1/t) = θ₁^(1/t) / (θ₁^(1/t) + θ₀^(1/t)).
pub fn theta_tilde(theta1: f64, temperature: f64) -> f64 {
    let l1 = theta1.ln() / temperature;
    let l0 = (1.0 - theta1).ln() / temperature;
    1.0 / (1.0 + (l0 - l1).exp())
}

/// Unnormalized log p(τ).
pub fn log_tau_prior(tau: f64, mode: &TauMode) -> Result<f64> {
    if !(tau > 0.0) && !matches!(mode, TauMode::HyperG { .. } if tau == 0.0) {
        return Err(EssError::numeric(format!("tau must be positive, got {tau}")));
    }
    match *mode {
        TauMode::Fixed(_) => Err(EssError::config("tau prior requested in fixed-tau mode")),
        TauMode::ZellnerSiow { a_tau, b_tau } => Ok(-(a_tau + 1.0) * tau.ln() - b_tau / tau),
        TauMode::HyperG { c_tau } => Ok(-c_tau * tau.ln_1p()),
    }
}

/// Normalized log density of τ (proper modes only).
pub fn log_tau_density(tau: f64, mode: &TauMode) -> Result<f64> {
    let base = log_tau_prior(tau, mode)?;
    match *mode {
        TauMode::ZellnerSiow { a_tau, b_tau } => Ok(base + a_tau * b_tau.ln() - ln_gamma(a_tau)),
        TauMode::HyperG { c_tau } if c_tau > 1.0 => Ok(base + (c_tau - 1.0).ln()),
        TauMode::HyperG { .. } => Err(EssError::config("hyper-g with c_tau <= 1 is improper")),
        TauMode::Fixed(_) => unreachable!(),
    }
}
