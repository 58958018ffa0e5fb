use serde::{Deserialize, Serialize};

use crate::error::{EssError, Result};
use crate::likelihood::{Evaluator, ModelFit};
use crate::model::ModelIndicator;
use crate::priors::{log_model_prior_size, PriorSpec};

/// Read-only state shared by every move within one sweep.
#[derive(Debug, Clone, Copy)]
pub struct MoveContext<'a> {
    pub ev: Evaluator<'a>,
    pub spec: &'a PriorSpec,
    pub tau: f64,
}

impl<'a> MoveContext<'a> {
    pub fn new(ev: Evaluator<'a>, spec: &'a PriorSpec, tau: f64) -> Self {
        MoveContext { ev, spec, tau }
    }

    pub fn p(&self) -> usize {
        self.ev.dataset().p()
    }

    pub fn log_prior(&self, p_gamma: usize) -> f64 {
        log_model_prior_size(p_gamma, self.spec, self.p())
    }
}

/// One tempered chain: its model, temperature and cached evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub gamma: ModelIndicator,
    pub temperature: f64,
    pub log_lik: f64,
    pub log_prior: f64,
    pub fit: ModelFit,
}

impl ChainState {
    pub fn new(gamma: ModelIndicator, temperature: f64, ctx: &MoveContext) -> Result<Self> {
        let (lm, fit) = ctx.ev.evaluate(&gamma, ctx.tau)?;
        let log_prior = ctx.log_prior(gamma.size());
        Ok(ChainState { gamma, temperature, log_lik: lm.value, log_prior, fit })
    }

    /// f(γ|τ) = log p(y|γ,τ) + log p(γ).
    pub fn log_post(&self) -> f64 {
        self.log_lik + self.log_prior
    }

    /// Replace the model and its caches, keeping the temperature.
    pub(crate) fn set_model(&mut self, gamma: ModelIndicator, log_lik: f64, log_prior: f64, fit: ModelFit) {
        self.gamma = gamma;
        self.log_lik = log_lik;
        self.log_prior = log_prior;
        self.fit = fit;
    }

    /// Largest absolute gap between the caches and a fresh evaluation.
    pub fn audit(&self, ctx: &MoveContext) -> Result<f64> {
        let (lm, _) = ctx.ev.evaluate(&self.gamma, ctx.tau)?;
        let lp = ctx.log_prior(self.gamma.size());
        Ok((lm.value - self.log_lik).abs().max((lp - self.log_prior).abs()))
    }
}

/// L tempered chains sharing one τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub chains: Vec<ChainState>,
    pub tau: f64,
}

impl Population {
    pub fn new(models: Vec<ModelIndicator>, temperatures: &[f64], ctx: &MoveContext) -> Result<Self> {
        if models.len() != temperatures.len() {
            return Err(EssError::config("one starting model per temperature is required"));
        }
        if models.len() < 2 {
            return Err(EssError::config("a population needs at least two chains"));
        }
        let chains = models
            .into_iter()
            .zip(temperatures)
            .map(|(g, &t)| ChainState::new(g, t, ctx))
            .collect::<Result<Vec<_>>>()?;
        Ok(Population { chains, tau: ctx.tau })
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn log_posts(&self) -> Vec<f64> {
        self.chains.iter().map(ChainState::log_post).collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.chains.iter().map(|c| c.temperature).collect()
    }

    pub fn set_temperatures(&mut self, temps: &[f64]) {
        for (c, &t) in self.chains.iter_mut().zip(temps) {
            c.temperature = t;
        }
    }

    /// Exchange the states (not the temperatures) of chains `a` and `b`.
    pub fn swap_states(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (left, right) = self.chains.split_at_mut(hi);
        let (x, y) = (&mut left[lo], &mut right[0]);
        std::mem::swap(&mut x.gamma, &mut y.gamma);
        std::mem::swap(&mut x.log_lik, &mut y.log_lik);
        std::mem::swap(&mut x.log_prior, &mut y.log_prior);
        std::mem::swap(&mut x.fit, &mut y.fit);
    }

    /// Recompute every chain's log-likelihood at a new τ.
    pub fn retau(&mut self, ctx: &MoveContext) -> Result<()> {
        for c in &mut self.chains {
            c.log_lik = ctx.ev.at_tau(&c.gamma, &c.fit, ctx.tau)?.value;
        }
        self.tau = ctx.tau;
        Ok(())
    }

    pub fn audit(&self, ctx: &MoveContext) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.chains {
            worst = worst.max(c.audit(ctx)?);
        }
        Ok(worst)
    }
}
