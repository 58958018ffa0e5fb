//! Exhaustive posterior over all 2^p models for small p.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{EssError, Result};
use crate::likelihood::Evaluator;
use crate::model::ModelIndicator;
use crate::priors::{log_model_prior, log_tau_density, PriorSpec, TauMode};

pub const MAX_ENUMERATION_P: usize = 20;
const GRID_POINTS: usize = 2001;
const LOG_TAU_MIN: f64 = -14.0;
const LOG_TAU_MAX: f64 = 18.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub p: usize,
    /// Unnormalized log posterior indexed by model bitmask (bit j ⇔ covariate j).
    pub log_post: Vec<f64>,
    pub log_norm: f64,
    pub inclusion: Vec<f64>,
    pub model_size_pmf: Vec<f64>,
}

pub fn mask_to_model(mask: usize, p: usize) -> ModelIndicator {
    ModelIndicator::from_unsorted((0..p).filter(|j| mask >> j & 1 == 1).collect())
}

pub fn model_to_mask(g: &ModelIndicator) -> usize {
    g.indices().iter().fold(0, |m, &j| m | 1 << j)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log p(y|γ), integrating τ on a log-scale trapezoid grid when τ is sampled.
fn log_evidence(ev: &Evaluator, gamma: &ModelIndicator, mode: &TauMode) -> Result<f64> {
    if let TauMode::Fixed(t) = *mode {
        return Ok(ev.evaluate(gamma, t)?.0.value);
    }
    let (_, fit) = ev.evaluate(gamma, 1.0)?;
    let h = (LOG_TAU_MAX - LOG_TAU_MIN) / (GRID_POINTS - 1) as f64;
    let mut terms = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let lam = LOG_TAU_MIN + h * i as f64;
        let tau = lam.exp();
        let ll = ev.at_tau(gamma, &fit, tau)?.value;
        let w = if i == 0 || i == GRID_POINTS - 1 { 0.5 } else { 1.0 };
        terms.push(ll + log_tau_density(tau, mode)? + lam + (w * h).ln());
    }
    Ok(log_sum_exp(&terms))
}

pub fn enumerate_posterior(ds: &Dataset, spec: &PriorSpec) -> Result<ExactPosterior> {
    let p = ds.p();
    if p == 0 {
        return Err(EssError::config("enumeration needs at least one covariate"));
    }
    if p > MAX_ENUMERATION_P {
        return Err(EssError::config(format!(
            "exhaustive enumeration is limited to p <= {MAX_ENUMERATION_P} (2^{p} models requested)"
        )));
    }
    spec.validate()?;
    if !spec.tau_mode.is_fixed() && !spec.tau_mode.is_proper() {
        return Err(EssError::config("integrating over tau requires a proper tau prior"));
    }
    let ev = Evaluator::new(ds, spec);
    let log_post: Vec<f64> = (0..1usize << p)
        .into_par_iter()
        .map(|mask| {
            let g = mask_to_model(mask, p);
            Ok(log_evidence(&ev, &g, &spec.tau_mode)? + log_model_prior(&g, spec, p))
        })
        .collect::<Result<_>>()?;
    let log_norm = log_sum_exp(&log_post);
    let mut inclusion = vec![0.0; p];
    let mut model_size_pmf = vec![0.0; p + 1];
    for (mask, lp) in log_post.iter().enumerate() {
        let w = (lp - log_norm).exp();
        model_size_pmf[mask.count_ones() as usize] += w;
        for (j, inc) in inclusion.iter_mut().enumerate() {
            if mask >> j & 1 == 1 {
                *inc += w;
            }
        }
    }
    Ok(ExactPosterior { p, log_post, log_norm, inclusion, model_size_pmf })
}

impl ExactPosterior {
    pub fn prob(&self, mask: usize) -> f64 {
        (self.log_post[mask] - self.log_norm).exp()
    }

    /// Total variation distance between the exact posterior and visit frequencies.
    pub fn tv_distance<'a, I: IntoIterator<Item = &'a ModelIndicator>>(&self, visits: I) -> f64 {
        let mut counts = vec![0usize; self.log_post.len()];
        let mut total = 0usize;
        for g in visits {
            counts[model_to_mask(g)] += 1;
            total += 1;
        }
        0.5 * counts
            .iter()
            .enumerate()
            .map(|(m, &c)| (c as f64 / total.max(1) as f64 - self.prob(m)).abs())
            .sum::<f64>()
    }

    /// Models ranked by posterior probability.
    pub fn ranked(&self) -> Vec<(ModelIndicator, f64)> {
        let mut idx: Vec<usize> = (0..self.log_post.len()).collect();
        idx.sort_by(|&a, &b| self.log_post[b].total_cmp(&self.log_post[a]).then(a.cmp(&b)));
        idx.into_iter().map(|m| (mask_to_model(m, self.p), self.prob(m))).collect()
    }
}
