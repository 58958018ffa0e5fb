//! Laplace approximation of the g-prior marginal with τ integrated out,
//! after the change of variables λ = log τ.
//!
//! With c₁ = (2a_σ+n−1−p_γ)/2, c₂ = (2a_σ+n−1)/2, c₃ = 2b_σ+yᵀy and
//! c₄ = 2b_σ+yᵀy(1−R²_γ), log p(y|γ,τ) = c₁log(1+τ) − c₂log(c₃+c₄τ).

use std::f64::consts::PI;

use crate::data::Dataset;
use crate::error::{EssError, Result};
use crate::likelihood::gprior_projection;
use crate::model::ModelIndicator;
use crate::priors::{log_tau_density, log_tau_prior, PriorFamily, PriorSpec, TauMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceTerms {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub r2: f64,
    pub p_gamma: usize,
}

impl LaplaceTerms {
    pub fn new(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<Self> {
        if spec.family != PriorFamily::GPrior {
            return Err(EssError::config("Laplace approximation is defined for the g-prior only"));
        }
        let n = ds.n();
        let k = gamma.size();
        if k >= n {
            return Err(EssError::numeric(format!("Laplace approximation needs n > p_gamma (n={n}, p_gamma={k})")));
        }
        let yty = ds.yty();
        if !(yty > 0.0) {
            return Err(EssError::numeric("response has zero sum of squares"));
        }
        let r2 = gprior_projection(gamma, ds) / yty;
        let base = 2.0 * spec.a_sigma + n as f64 - 1.0;
        Ok(LaplaceTerms {
            c1: (base - k as f64) / 2.0,
            c2: base / 2.0,
            c3: 2.0 * spec.b_sigma + yty,
            c4: 2.0 * spec.b_sigma + yty * (1.0 - r2),
            r2,
            p_gamma: k,
        })
    }

    /// log p(y|γ,τ), identical to the g-prior log marginal.
    pub fn log_lik(&self, tau: f64) -> f64 {
        self.c1 * tau.ln_1p() - self.c2 * (self.c3 + self.c4 * tau).ln()
    }
}

/// Real roots of a₃x³ + a₂x² + a₁x + a₀, ascending, each polished by Newton steps.
pub fn solve_cubic(a3: f64, a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    if a3 == 0.0 {
        return solve_quadratic(a2, a1, a0);
    }
    let (b, c, d) = (a2 / a3, a1 / a3, a0 / a3);
    let poly = |x: f64| ((x + b) * x + c) * x + d;
    let dpoly = |x: f64| (3.0 * x + 2.0 * b) * x + c;
    // depressed cubic t³ + pt + q with x = t − b/3
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = (q / 2.0).powi(2).max((p / 3.0).abs().powi(3)).max(f64::MIN_POSITIVE);
    let shift = b / 3.0;
    let mut roots = if disc.abs() < 1e-12 * scale {
        bracketed_roots(&poly, b, c, d)
    } else if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v - shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3).map(|k| 2.0 * r * ((phi + 2.0 * PI * k as f64) / 3.0).cos() - shift).collect()
    };
    for x in roots.iter_mut() {
        for _ in 0..4 {
            let d = dpoly(*x);
            if d == 0.0 {
                break;
            }
            let step = poly(*x) / d;
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Roots by bisection between the critical points of a monic cubic.
fn bracketed_roots(poly: &dyn Fn(f64) -> f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let bound = 1.0 + b.abs().max(c.abs()).max(d.abs());
    let mut knots = vec![-bound];
    let crit = solve_quadratic(3.0, 2.0 * b, c);
    knots.extend(crit.into_iter().filter(|x| x.abs() < bound));
    knots.push(bound);
    let mut out: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (poly(lo), poly(hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            if fhi.abs() <= 1e-12 * bound.powi(3) {
                out.push(hi);
            }
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if poly(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * bound);
    out
}

/// Real roots of a₂x² + a₁x + a₀ in a cancellation-free form.
pub fn solve_quadratic(a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    if a2 == 0.0 {
        return if a1 == 0.0 { Vec::new() } else { vec![-a0 / a1] };
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc < 0.0 {
        return Vec::new();
    }
    let sign = if a1 >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (a1 + sign * disc.sqrt());
    let mut r = if q == 0.0 { vec![0.0] } else { vec![q / a2, a0 / q] };
    r.sort_by(|a, b| a.total_cmp(b));
    r.dedup();
    r
}

fn log_integrand(t: &LaplaceTerms, lambda: f64, mode: &TauMode) -> Result<f64> {
    let tau = lambda.exp();
    let prior = if mode.is_proper() { log_tau_density(tau, mode)? } else { log_tau_prior(tau, mode)? };
    Ok(t.log_lik(tau) + prior + lambda)
}

/// Posterior mode e^λ̂ of the λ-scale integrand under the Zellner-Siow prior: the real root of a cubic in τ.
pub fn laplace_mode_zs(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<f64> {
    let TauMode::ZellnerSiow { a_tau, b_tau } = spec.tau_mode else {
        return Err(EssError::config("laplace_mode_zs requires a Zellner-Siow tau prior"));
    };
    let t = LaplaceTerms::new(gamma, ds, spec)?;
    let (c1, c2, c3, c4) = (t.c1, t.c2, t.c3, t.c4);
    let roots = solve_cubic(
        (c1 - c2 - a_tau) * c4,
        c1 * c3 - c2 * c4 + b_tau * c4 - a_tau * (c3 + c4),
        b_tau * (c3 + c4) - a_tau * c3,
        b_tau * c3,
    );
    let mut best: Option<(f64, f64)> = None;
    for u in roots.into_iter().filter(|u| *u > 0.0 && u.is_finite()) {
        let v = log_integrand(&t, u.ln(), &spec.tau_mode)?;
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((u, v));
        }
    }
    best.map(|(u, _)| u).ok_or_else(|| {
        EssError::numeric("no positive root of the Zellner-Siow mode equation; requires b_tau > a_tau")
    })
}

/// Closed-form hyper-g mode on the τ scale, clamped at 0.
pub fn laplace_mode_hyperg(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<f64> {
    let TauMode::HyperG { c_tau } = spec.tau_mode else {
        return Err(EssError::config("laplace_mode_hyperg requires a hyper-g tau prior"));
    };
    let t = LaplaceTerms::new(gamma, ds, spec)?;
    let n = ds.n() as f64;
    let d = t.p_gamma as f64 + 2.0 * c_tau;
    let dof = 2.0 * spec.a_sigma + n - 1.0 - d;
    if !(dof > 0.0) {
        return Err(EssError::numeric("2a_sigma + n - 1 - (p_gamma + 2c_tau) must be positive"));
    }
    let resid = 2.0 * spec.b_sigma / ds.yty() + (1.0 - t.r2);
    Ok(((t.r2 / d) / (resid / dof) - 1.0).max(0.0))
}

/// Hyper-g mode of the λ-scale integrand (positive root of a quadratic), returned as e^λ̂.
pub fn laplace_mode_hyperg_log_scale(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<f64> {
    let TauMode::HyperG { c_tau } = spec.tau_mode else {
        return Err(EssError::config("hyper-g mode requested for a different tau prior"));
    };
    let t = LaplaceTerms::new(gamma, ds, spec)?;
    let cs = t.c1 - c_tau;
    let roots = solve_quadratic((cs - t.c2 + 1.0) * t.c4, cs * t.c3 - t.c2 * t.c4 + t.c3 + t.c4, t.c3);
    roots
        .into_iter()
        .filter(|u| *u > 0.0 && u.is_finite())
        .next_back()
        .ok_or_else(|| EssError::numeric("hyper-g integrand has no interior mode on the log scale"))
}

/// d²/dλ² log I(λ) at u = e^λ.
fn curvature(t: &LaplaceTerms, u: f64, mode: &TauMode) -> f64 {
    let common = -t.c2 * t.c3 * t.c4 * u / (t.c3 + t.c4 * u).powi(2);
    match *mode {
        TauMode::ZellnerSiow { b_tau, .. } => t.c1 * u / (1.0 + u).powi(2) + common - b_tau / u,
        TauMode::HyperG { c_tau } => (t.c1 - c_tau) * u / (1.0 + u).powi(2) + common,
        TauMode::Fixed(_) => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceFit {
    pub log_marginal: f64,
    pub tau_mode: f64,
    pub sigma2_lambda: f64,
}

pub fn laplace_fit(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<LaplaceFit> {
    let u = match spec.tau_mode {
        TauMode::ZellnerSiow { .. } => laplace_mode_zs(gamma, ds, spec)?,
        TauMode::HyperG { .. } => laplace_mode_hyperg_log_scale(gamma, ds, spec)?,
        TauMode::Fixed(_) => return Err(EssError::config("Laplace approximation needs a tau prior")),
    };
    let t = LaplaceTerms::new(gamma, ds, spec)?;
    let h = curvature(&t, u, &spec.tau_mode);
    if !(h < 0.0) {
        return Err(EssError::numeric(format!("non-negative curvature {h} at the Laplace mode")));
    }
    let sigma2 = -1.0 / h;
    let log_marginal = log_integrand(&t, u.ln(), &spec.tau_mode)? + 0.5 * (2.0 * PI).ln() + 0.5 * sigma2.ln();
    Ok(LaplaceFit { log_marginal, tau_mode: u, sigma2_lambda: sigma2 })
}

/// Laplace approximation of log p(y|γ) with τ integrated out.
pub fn laplace_log_marginal(gamma: &ModelIndicator, ds: &Dataset, spec: &PriorSpec) -> Result<f64> {
    Ok(laplace_fit(gamma, ds, spec)?.log_marginal)
}
