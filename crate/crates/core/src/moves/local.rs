use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{ChainState, MoveContext};
use super::{mh_accept, MoveKind, MoveOutcome};
use crate::error::Result;
use crate::priors::{theta_one, theta_tilde};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalMove {
    Fsmh,
    Mc3,
    Gibbs,
}

/// Fast Scan Metropolis-Hastings over all p indices in a fresh random order.
pub fn fsmh_scan<R: Rng + ?Sized>(
    chain: &mut ChainState,
    index: usize,
    ctx: &MoveContext,
    rng: &mut R,
) -> Result<MoveOutcome> {
    let p = ctx.p();
    let t = chain.temperature;
    let mut out = MoveOutcome::new(MoveKind::Fsmh, (index, None));
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    for j in order {
        let on = chain.gamma.contains(j);
        let size_on = chain.gamma.size() + usize::from(!on);
        let th1 = theta_tilde(theta_one(size_on, p, ctx.spec), t);
        let q = if on { 1.0 - th1 } else { th1 };
        if rng.random::<f64>() >= q {
            continue;
        }
        out.proposals += 1;
        let ng = chain.gamma.flipped(j);
        let (lm, fit) = ctx.ev.evaluate_flip(&ng, &chain.fit, j, ctx.tau)?;
        out.models_evaluated += 1;
        if mh_accept((lm.value - chain.log_lik) / t, rng, &mut out.nonfinite) {
            let lp = ctx.log_prior(ng.size());
            chain.set_model(ng, lm.value, lp, fit);
            out.acceptances += 1;
        }
    }
    out.accepted = out.acceptances > 0;
    Ok(out)
}

/// Systematic scan j = 1..p drawing each γ_j from its tempered full conditional.
pub fn gibbs_full_scan<R: Rng + ?Sized>(
    chain: &mut ChainState,
    index: usize,
    ctx: &MoveContext,
    rng: &mut R,
) -> Result<MoveOutcome> {
    let p = ctx.p();
    let t = chain.temperature;
    let mut out = MoveOutcome::new(MoveKind::Gibbs, (index, None));
    for j in 0..p {
        let ng = chain.gamma.flipped(j);
        let (lm, fit) = ctx.ev.evaluate_flip(&ng, &chain.fit, j, ctx.tau)?;
        out.models_evaluated += 1;
        out.proposals += 1;
        let lp = ctx.log_prior(ng.size());
        let f_new = lm.value + lp;
        let f_cur = chain.log_post();
        let on = chain.gamma.contains(j);
        let (f1, f0) = if on { (f_cur, f_new) } else { (f_new, f_cur) };
        let d = (f0 - f1) / t;
        let u: f64 = rng.random();
        if d.is_nan() {
            out.nonfinite += 1;
            continue;
        }
        let p1 = 1.0 / (1.0 + d.exp());
        if (u < p1) != on {
            chain.set_model(ng, lm.value, lp, fit);
            out.acceptances += 1;
        }
    }
    out.accepted = out.acceptances > 0;
    Ok(out)
}

/// One MC³ step: add/delete or swap with probability 1/2 each.
pub fn mc3_step<R: Rng + ?Sized>(
    chain: &mut ChainState,
    index: usize,
    ctx: &MoveContext,
    rng: &mut R,
) -> Result<MoveOutcome> {
    let p = ctx.p();
    let t = chain.temperature;
    let mut out = MoveOutcome::new(MoveKind::Mc3, (index, None));
    out.proposals = 1;
    let size = chain.gamma.size();
    let (ng, lm, fit) = if rng.random_bool(0.5) {
        let j = rng.random_range(0..p);
        let ng = chain.gamma.flipped(j);
        let (lm, fit) = ctx.ev.evaluate_flip(&ng, &chain.fit, j, ctx.tau)?;
        (ng, lm, fit)
    } else {
        if size == 0 || size == p {
            return Ok(out);
        }
        let drop = chain.gamma.indices()[rng.random_range(0..size)];
        let mut add = rng.random_range(0..p - size);
        for &inc in chain.gamma.indices() {
            if inc <= add {
                add += 1;
            } else {
                break;
            }
        }
        let ng = chain.gamma.without(drop).with(add);
        let (lm, fit) = ctx.ev.evaluate(&ng, ctx.tau)?;
        (ng, lm, fit)
    };
    out.models_evaluated = 1;
    let lp = ctx.log_prior(ng.size());
    if mh_accept((lm.value + lp - chain.log_post()) / t, rng, &mut out.nonfinite) {
        chain.set_model(ng, lm.value, lp, fit);
        out.accepted = true;
        out.acceptances = 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::likelihood::Evaluator;
    use crate::model::ModelIndicator;
    use crate::priors::{OmegaHyper, PriorFamily, PriorSpec, TauMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, n: usize, p: usize) -> (Dataset, PriorSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect();
        let y = (0..n).map(|i| 3.0 * x[i] - 2.0 * x[n + i] + 0.3 * (rng.random::<f64>() - 0.5)).collect();
        let ds = Dataset::from_columns(y, x, p).unwrap().center();
        let spec = PriorSpec::new(
            PriorFamily::GPrior,
            TauMode::Fixed(10.0),
            OmegaHyper { a: 1.0, b: 1.0, binomial_limit: false },
        );
        (ds, spec)
    }

    fn exact_inclusion(ctx: &MoveContext, p: usize) -> Vec<f64> {
        let mut lw = Vec::new();
        for mask in 0..(1usize << p) {
            let g = ModelIndicator::from_mask(&(0..p).map(|j| mask >> j & 1 == 1).collect::<Vec<_>>());
            let (lm, _) = ctx.ev.evaluate(&g, ctx.tau).unwrap();
            lw.push((g, lm.value + ctx.log_prior(g_size(mask))));
        }
        let mx = lw.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lw.iter().map(|x| (x.1 - mx).exp()).sum();
        (0..p)
            .map(|j| lw.iter().filter(|x| x.0.contains(j)).map(|x| (x.1 - mx).exp()).sum::<f64>() / z)
            .collect()
    }

    fn g_size(mask: usize) -> usize {
        mask.count_ones() as usize
    }

    fn run_frequencies(
        step: fn(&mut ChainState, usize, &MoveContext, &mut ChaCha8Rng) -> Result<MoveOutcome>,
        iters: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let (ds, spec) = setup(3, 25, 4);
        let ev = Evaluator::new(&ds, &spec);
        let ctx = MoveContext::new(ev, &spec, 10.0);
        let mut chain = ChainState::new(ModelIndicator::empty(), 1.0, &ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0.0; 4];
        for _ in 0..iters {
            step(&mut chain, 0, &ctx, &mut rng).unwrap();
            for &j in chain.gamma.indices() {
                counts[j] += 1.0;
            }
        }
        assert!(chain.audit(&ctx).unwrap() < 1e-9);
        (counts.iter().map(|c| c / iters as f64).collect(), exact_inclusion(&ctx, 4))
    }

    #[test]
    fn fsmh_matches_enumeration() {
        let (est, exact) = run_frequencies(fsmh_scan, 20_000);
        for (a, b) in est.iter().zip(&exact) {
            assert!((a - b).abs() < 0.02, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn gibbs_matches_enumeration() {
        let (est, exact) = run_frequencies(gibbs_full_scan, 20_000);
        for (a, b) in est.iter().zip(&exact) {
            assert!((a - b).abs() < 0.02, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn mc3_matches_enumeration() {
        let (est, exact) = run_frequencies(mc3_step, 80_000);
        for (a, b) in est.iter().zip(&exact) {
            assert!((a - b).abs() < 0.02, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn hot_gibbs_is_near_uniform() {
        let (ds, spec) = setup(4, 20, 3);
        let ev = Evaluator::new(&ds, &spec);
        let ctx = MoveContext::new(ev, &spec, 10.0);
        let mut chain = ChainState::new(ModelIndicator::empty(), 1e12, &ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut on = 0usize;
        let iters = 20_000;
        for _ in 0..iters {
            gibbs_full_scan(&mut chain, 0, &ctx, &mut rng).unwrap();
            on += chain.gamma.size();
        }
        assert!((on as f64 / (3 * iters) as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn mc3_swap_guard_on_empty_model() {
        let (ds, spec) = setup(5, 20, 3);
        let ev = Evaluator::new(&ds, &spec);
        let ctx = MoveContext::new(ev, &spec, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut saw_guard = false;
        for _ in 0..50 {
            let mut chain = ChainState::new(ModelIndicator::empty(), 1.0, &ctx).unwrap();
            let out = mc3_step(&mut chain, 0, &ctx, &mut rng).unwrap();
            if out.models_evaluated == 0 {
                assert!(!out.accepted);
                assert!(chain.gamma.size() == 0);
                saw_guard = true;
            }
        }
        assert!(saw_guard);
    }

    #[test]
    fn mc3_swap_picks_an_excluded_index() {
        let (ds, spec) = setup(6, 20, 6);
        let ev = Evaluator::new(&ds, &spec);
        let ctx = MoveContext::new(ev, &spec, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = ModelIndicator::new(vec![1, 2, 4], 6).unwrap();
        for _ in 0..200 {
            let mut chain = ChainState::new(start.clone(), 1e9, &ctx).unwrap();
            mc3_step(&mut chain, 0, &ctx, &mut rng).unwrap();
            let s = chain.gamma.size();
            assert!((2..=4).contains(&s));
        }
    }
}
