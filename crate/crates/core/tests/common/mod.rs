#![allow(dead_code)]

use ess_core::data::Dataset;
use ess_core::model::ModelIndicator;
use ess_core::priors::{OmegaHyper, PriorFamily, PriorSpec, TauMode};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::ln_beta;

/// Centered instance with equicorrelated-ish columns and a few nonzero effects.
pub fn instance(seed: u64, n: usize, p: usize, beta: &[f64], noise: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = Vec::with_capacity(n * p);
    for _ in 0..p {
        for zi in &z {
            let e: f64 = rng.sample(StandardNormal);
            x.push(e + 0.5 * zi);
        }
    }
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = beta.iter().enumerate().map(|(j, b)| b * x[j * n + i]).sum();
            signal + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::from_columns(y, x, p).unwrap().center()
}

pub fn spec(family: PriorFamily, tau: TauMode, a: f64, b: f64) -> PriorSpec {
    PriorSpec::new(family, tau, OmegaHyper { a, b, binomial_limit: false })
}

pub fn design(ds: &Dataset, gamma: &ModelIndicator) -> DMatrix<f64> {
    let idx = gamma.indices();
    DMatrix::from_fn(ds.n(), idx.len(), |i, c| ds.column(idx[c])[i])
}

/// Conjugate marginal with prior β_γ ~ N(0, σ²Σ): −½log|XᵀX+Σ⁻¹| − ½log|Σ| − c·log(2b + S).
pub fn dense_log_marginal(ds: &Dataset, gamma: &ModelIndicator, sigma: &DMatrix<f64>, a: f64, b: f64) -> f64 {
    let n = ds.n() as f64;
    let y = DVector::from_column_slice(ds.y());
    let yty = y.dot(&y);
    let c = (2.0 * a + n - 1.0) / 2.0;
    if gamma.size() == 0 {
        return -c * (2.0 * b + yty).ln();
    }
    let x = design(ds, gamma);
    let sigma_inv = sigma.clone().try_inverse().unwrap();
    let k = x.transpose() * &x + &sigma_inv;
    let xty = x.transpose() * &y;
    let k_inv = k.clone().try_inverse().unwrap();
    let s = yty - xty.dot(&(&k_inv * &xty));
    -0.5 * k.determinant().ln() - 0.5 * sigma.determinant().ln() - c * (2.0 * b + s).ln()
}

pub fn gprior_sigma(ds: &Dataset, gamma: &ModelIndicator, tau: f64) -> DMatrix<f64> {
    let x = design(ds, gamma);
    (x.transpose() * x).try_inverse().unwrap() * tau
}

pub fn indep_sigma(k: usize, tau: f64) -> DMatrix<f64> {
    DMatrix::identity(k, k) * tau
}

pub fn dense_log_marginal_family(ds: &Dataset, gamma: &ModelIndicator, spec: &PriorSpec, tau: f64) -> f64 {
    let sigma = match spec.family {
        PriorFamily::GPrior => gprior_sigma(ds, gamma, tau),
        PriorFamily::Independent => indep_sigma(gamma.size(), tau),
    };
    dense_log_marginal(ds, gamma, &sigma, spec.a_sigma, spec.b_sigma)
}

/// Beta-binomial log p(γ).
pub fn log_prior(k: usize, p: usize, a: f64, b: f64) -> f64 {
    ln_beta(k as f64 + a, (p - k) as f64 + b) - ln_beta(a, b)
}

pub fn mask_model(mask: usize, p: usize) -> ModelIndicator {
    ModelIndicator::from_unsorted((0..p).filter(|j| mask >> j & 1 == 1).collect())
}

pub fn model_mask(g: &ModelIndicator) -> usize {
    g.indices().iter().fold(0, |m, &j| m | 1 << j)
}

/// Exact posterior over all 2^p models at fixed τ, by dense algebra.
pub fn exact_posterior(ds: &Dataset, spec: &PriorSpec, tau: f64) -> Vec<f64> {
    let p = ds.p();
    let lp: Vec<f64> = (0..1usize << p)
        .map(|m| {
            let g = mask_model(m, p);
            dense_log_marginal_family(ds, &g, spec, tau) + log_prior(g.size(), p, spec.a_omega, spec.b_omega)
        })
        .collect();
    let mx = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lp.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

pub fn inclusion(probs: &[f64], p: usize) -> Vec<f64> {
    (0..p).map(|j| probs.iter().enumerate().filter(|(m, _)| m >> j & 1 == 1).map(|(_, w)| w).sum()).collect()
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
