use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{MoveContext, Population};
use super::{mh_accept, MoveKind, MoveOutcome};
use crate::data::Dataset;
use crate::error::{EssError, Result};
use crate::likelihood::ModelFit;
use crate::model::ModelIndicator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossoverKind {
    OnePoint,
    Uniform,
    Adaptive,
    Block,
}

impl CrossoverKind {
    pub const ALL: [CrossoverKind; 4] =
        [CrossoverKind::OnePoint, CrossoverKind::Uniform, CrossoverKind::Adaptive, CrossoverKind::Block];

    pub fn move_kind(self) -> MoveKind {
        match self {
            CrossoverKind::OnePoint => MoveKind::Crossover1pt,
            CrossoverKind::Uniform => MoveKind::CrossoverUnif,
            CrossoverKind::Adaptive => MoveKind::CrossoverAdaptive,
            CrossoverKind::Block => MoveKind::CrossoverBlock,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CrossoverKind::OnePoint => "1pt",
            CrossoverKind::Uniform => "uniform",
            CrossoverKind::Adaptive => "adaptive",
            CrossoverKind::Block => "block",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1pt" | "1-point" | "onepoint" | "one-point" => Ok(CrossoverKind::OnePoint),
            "uniform" | "unif" => Ok(CrossoverKind::Uniform),
            "adaptive" => Ok(CrossoverKind::Adaptive),
            "block" => Ok(CrossoverKind::Block),
            other => Err(EssError::config(format!("unknown crossover operator {other:?}"))),
        }
    }
}

/// Column means and centred norms, for on-demand pairwise correlations.
#[derive(Debug, Clone)]
pub struct CorrelationIndex {
    means: Vec<f64>,
    norms: Vec<f64>,
    pub rho0: f64,
}

impl CorrelationIndex {
    pub fn new(ds: &Dataset, rho0: f64) -> Self {
        let n = ds.n() as f64;
        let mut means = Vec::with_capacity(ds.p());
        let mut norms = Vec::with_capacity(ds.p());
        for j in 0..ds.p() {
            let c = ds.column(j);
            let m = c.iter().sum::<f64>() / n;
            means.push(m);
            norms.push(c.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt());
        }
        CorrelationIndex { means, norms, rho0 }
    }

    pub fn correlation(&self, ds: &Dataset, a: usize, b: usize) -> f64 {
        let d = self.norms[a] * self.norms[b];
        if d == 0.0 {
            return 0.0;
        }
        let (ma, mb) = (self.means[a], self.means[b]);
        let s: f64 = ds.column(a).iter().zip(ds.column(b)).map(|(x, y)| (x - ma) * (y - mb)).sum();
        s / d
    }

    pub fn in_block(&self, ds: &Dataset, anchor: usize, j: usize) -> bool {
        j == anchor || self.correlation(ds, anchor, j).abs() >= self.rho0
    }
}

/// First-parent probabilities ∝ exp{f_l / t_s}.
pub fn parent_selection_probs(f: &[f64], t_s: f64) -> Vec<f64> {
    let w: Vec<f64> = f.iter().map(|v| v / t_s).collect();
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return vec![1.0 / f.len() as f64; f.len()];
    }
    let e: Vec<f64> = w.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// log P(chain `l` is drawn as first parent).
pub fn selection_log_prob(f: &[f64], t_s: f64, l: usize) -> f64 {
    let mx = f.iter().map(|v| v / t_s).fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return -(f.len() as f64).ln();
    }
    let z: f64 = f.iter().map(|v| (v / t_s - mx).exp()).sum();
    f[l] / t_s - mx - z.ln()
}

/// Boltzmann draw for the first parent, uniform draw among the rest for the second.
pub fn select_parents<R: Rng + ?Sized>(f: &[f64], t_s: f64, rng: &mut R) -> (usize, usize) {
    let probs = parent_selection_probs(f, t_s);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut l = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            l = i;
            break;
        }
    }
    let r0 = rng.random_range(0..f.len() - 1);
    (l, if r0 >= l { r0 + 1 } else { r0 })
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                out.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Loci (where the parents differ) whose values the operator exchanges.
pub fn apply_crossover<R: Rng + ?Sized>(
    kind: CrossoverKind,
    left: &ModelIndicator,
    right: &ModelIndicator,
    pop: &Population,
    ctx: &MoveContext,
    corr: Option<&CorrelationIndex>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let p = ctx.p();
    let diff = symmetric_difference(left.indices(), right.indices());
    Ok(match kind {
        CrossoverKind::OnePoint => {
            if p < 2 {
                return Ok(Vec::new());
            }
            let cut = rng.random_range(1..p);
            diff.into_iter().filter(|&j| j >= cut).collect()
        }
        CrossoverKind::Uniform => diff.into_iter().filter(|_| rng.random_bool(0.5)).collect(),
        CrossoverKind::Adaptive => {
            let l = pop.len() as f64;
            diff.into_iter()
                .filter(|&j| {
                    let q = pop.chains.iter().filter(|c| c.gamma.contains(j)).count() as f64 / l;
                    rng.random_bool((2.0 * q * (1.0 - q)).clamp(0.0, 1.0))
                })
                .collect()
        }
        CrossoverKind::Block => {
            let corr = corr.ok_or_else(|| EssError::config("block crossover needs a correlation index"))?;
            let ds = ctx.ev.dataset();
            let anchor = rng.random_range(0..p);
            diff.into_iter().filter(|&j| corr.in_block(ds, anchor, j)).collect()
        }
    })
}

/// Parent selection, offspring generation and the joint Metropolis-Hastings step.
pub fn crossover<R: Rng + ?Sized>(
    pop: &mut Population,
    kind: CrossoverKind,
    ctx: &MoveContext,
    selection_temperature: f64,
    corr: Option<&CorrelationIndex>,
    rng: &mut R,
) -> Result<MoveOutcome> {
    let f = pop.log_posts();
    let (l, r) = select_parents(&f, selection_temperature, rng);
    let mut out = MoveOutcome::new(kind.move_kind(), (l, Some(r)));
    out.proposals = 1;
    let swap = apply_crossover(kind, &pop.chains[l].gamma, &pop.chains[r].gamma, pop, ctx, corr, rng)?;
    if swap.is_empty() {
        out.accepted = true;
        out.noop = true;
        return Ok(out);
    }
    let new_l = ModelIndicator::from_unsorted(symmetric_difference(pop.chains[l].gamma.indices(), &swap));
    let new_r = ModelIndicator::from_unsorted(symmetric_difference(pop.chains[r].gamma.indices(), &swap));

    let eval = |g: &ModelIndicator, out: &mut MoveOutcome| -> Result<(f64, ModelFit)> {
        for c in [l, r] {
            if pop.chains[c].gamma == *g {
                return Ok((pop.chains[c].log_lik, pop.chains[c].fit.clone()));
            }
        }
        out.models_evaluated += 1;
        let (lm, fit) = ctx.ev.evaluate(g, ctx.tau)?;
        Ok((lm.value, fit))
    };
    let (ll_l, fit_l) = eval(&new_l, &mut out)?;
    let (ll_r, fit_r) = eval(&new_r, &mut out)?;
    let lp_l = ctx.log_prior(new_l.size());
    let lp_r = ctx.log_prior(new_r.size());

    let (t_l, t_r) = (pop.chains[l].temperature, pop.chains[r].temperature);
    let mut f_new = f.clone();
    f_new[l] = ll_l + lp_l;
    f_new[r] = ll_r + lp_r;
    let log_ratio = (f_new[l] - f[l]) / t_l + (f_new[r] - f[r]) / t_r
        + selection_log_prob(&f_new, selection_temperature, l)
        - selection_log_prob(&f, selection_temperature, l);
    if mh_accept(log_ratio, rng, &mut out.nonfinite) {
        pop.chains[l].set_model(new_l, ll_l, lp_l, fit_l);
        pop.chains[r].set_model(new_r, ll_r, lp_r, fit_r);
        out.accepted = true;
        out.acceptances = 1;
    }
    Ok(out)
}
