//! Burn-in tuning of the geometric temperature ladder and the adaptive
//! random-walk proposal for log τ.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EssError, Result};
use crate::moves::{MoveContext, Population};
use crate::priors::{log_tau_prior, TauMode};

pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const TARGET_EXCHANGE_ACCEPTANCE: f64 = 0.5;
pub const TARGET_TAU_ACCEPTANCE: f64 = 0.44;
pub const LOG_SD_MIN: f64 = -10.0;
pub const LOG_SD_MAX: f64 = 10.0;

/// Number of adaptation batches in the burn-in, K̃ (at least 1).
pub fn burn_in_batches(burn_in: usize, batch_size: usize) -> usize {
    (burn_in / batch_size.max(1)).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder {
    log2_b: f64,
    pub chains: usize,
    pub batch_size: usize,
    pub delta_b: f64,
    pub frozen: bool,
    temperatures: Vec<f64>,
}

impl TemperatureLadder {
    pub fn new(chains: usize, b1: f64, burn_in: usize, batch_size: usize) -> Result<Self> {
        if chains < 3 {
            return Err(EssError::config(format!("at least 3 chains are required (got {chains})")));
        }
        if !(b1 > 1.0 && b1.is_finite()) {
            return Err(EssError::config(format!("initial ladder ratio b1 must exceed 1, got {b1}")));
        }
        let k = burn_in_batches(burn_in, batch_size);
        let mut ladder = TemperatureLadder {
            log2_b: b1.log2(),
            chains,
            batch_size,
            delta_b: b1.log2() / k as f64,
            frozen: false,
            temperatures: Vec::new(),
        };
        ladder.recompute();
        Ok(ladder)
    }

    fn recompute(&mut self) {
        let b = self.b();
        self.temperatures = (0..self.chains).map(|l| b.powi(l as i32)).collect();
    }

    pub fn b(&self) -> f64 {
        self.log2_b.exp2()
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn hottest(&self) -> f64 {
        *self.temperatures.last().unwrap()
    }

    /// One batch update from the DR-exchange acceptance rate.
    pub fn update(&mut self, batch_acceptance: f64) -> Result<()> {
        if self.frozen {
            return Err(EssError::config("temperature ladder is frozen after burn-in"));
        }
        if batch_acceptance < TARGET_EXCHANGE_ACCEPTANCE {
            self.log2_b = (self.log2_b - self.delta_b).max(0.0);
        } else if batch_acceptance > TARGET_EXCHANGE_ACCEPTANCE {
            self.log2_b += self.delta_b;
        }
        self.recompute();
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauProposalState {
    pub log_sd: f64,
    pub ls1: f64,
    pub k_tilde: usize,
    /// Index of the next batch, starting at 1.
    pub batch_index: usize,
    pub batch_count: usize,
    pub batch_accepts: usize,
}

impl TauProposalState {
    pub fn new(ls1: f64, k_tilde: usize) -> Self {
        TauProposalState {
            log_sd: ls1.clamp(LOG_SD_MIN, LOG_SD_MAX),
            ls1,
            k_tilde: k_tilde.max(1),
            batch_index: 1,
            batch_count: 0,
            batch_accepts: 0,
        }
    }

    /// δ_τ(k) = min{|ls₁ − 5|/K̃, k^(−1/2)}.
    pub fn delta(&self, k: usize) -> f64 {
        ((self.ls1 - 5.0).abs() / self.k_tilde as f64).min((k.max(1) as f64).powf(-0.5))
    }

    pub fn observe(&mut self, accepted: bool) {
        self.batch_count += 1;
        self.batch_accepts += usize::from(accepted);
    }

    /// Close the current batch; returns its acceptance rate and adapts.
    pub fn end_batch(&mut self) -> f64 {
        let rate = if self.batch_count == 0 { 0.0 } else { self.batch_accepts as f64 / self.batch_count as f64 };
        self.adapt(rate);
        self.batch_count = 0;
        self.batch_accepts = 0;
        rate
    }

    pub fn adapt(&mut self, batch_acceptance: f64) {
        let d = self.delta(self.batch_index);
        let step = if batch_acceptance > TARGET_TAU_ACCEPTANCE { d } else { -d };
        self.log_sd = (self.log_sd + step).clamp(LOG_SD_MIN, LOG_SD_MAX);
        self.batch_index += 1;
    }
}

fn tau_target(loglik: &[f64], temps: &[f64], tau: f64, mode: &TauMode) -> Result<f64> {
    let tempered: f64 = loglik.iter().zip(temps).map(|(l, t)| l / t).sum();
    Ok(tempered + log_tau_prior(tau, mode)? + tau.ln())
}

/// Metropolis-within-Gibbs update of the shared τ on the log scale.
/// `ctx.tau` must equal `pop.tau`. Returns the (possibly unchanged) τ and the decision.
pub fn tau_mwg_step<R: Rng + ?Sized>(
    pop: &mut Population,
    ctx: &MoveContext,
    state: &TauProposalState,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let mode = ctx.spec.tau_mode;
    if mode.is_fixed() {
        return Err(EssError::config("tau is fixed; no tau update is defined"));
    }
    let z: f64 = rng.sample(StandardNormal);
    let tau = pop.tau;
    let proposal = (tau.ln() + z * state.log_sd.exp()).exp();
    let u: f64 = rng.random();
    if !(proposal > 0.0 && proposal.is_finite()) {
        return Ok((tau, false));
    }
    let temps = pop.temperatures();
    let current: Vec<f64> = pop.chains.iter().map(|c| c.log_lik).collect();
    let mut next = Vec::with_capacity(pop.len());
    for c in &pop.chains {
        next.push(ctx.ev.at_tau(&c.gamma, &c.fit, proposal)?.value);
    }
    let log_ratio = tau_target(&next, &temps, proposal, &mode)? - tau_target(&current, &temps, tau, &mode)?;
    if log_ratio.is_nan() || !(log_ratio >= 0.0 || u.ln() < log_ratio) {
        return Ok((tau, false));
    }
    for (c, l) in pop.chains.iter_mut().zip(next) {
        c.log_lik = l;
    }
    pop.tau = proposal;
    Ok((proposal, true))
}
