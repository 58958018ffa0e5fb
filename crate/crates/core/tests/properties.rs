mod common;

use common::*;
use ess_core::engine::TraceRecord;
use ess_core::estimation::{inclusion_probabilities, model_size_posterior, swap_frequencies, InclusionWeighting};
use ess_core::likelihood::{log_marginal_gprior, log_marginal_indep, r_squared};
use ess_core::model::ModelIndicator;
use ess_core::moves::{all_exchange_log_weights, parent_selection_probs, stage_one_log_ratio};
use ess_core::priors::{elicit_omega_hyperparams, log_model_prior_size, theta_one, theta_tilde, PriorFamily, TauMode};
use proptest::prelude::*;
use statrs::function::factorial::ln_binomial;

fn subset(p: usize) -> impl Strategy<Value = ModelIndicator> {
    proptest::collection::vec(any::<bool>(), p).prop_map(|m| ModelIndicator::from_mask(&m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gprior_matches_dense(seed in 0u64..10_000, g in subset(6), tau in 0.05f64..200.0, a in 1e-3f64..3.0, b in 1e-3f64..3.0) {
        let ds = instance(seed, 25, 6, &[0.8, 0.0, -0.4, 0.2, 0.0, 0.5], 1.0);
        let lib = log_marginal_gprior(&g, tau, &ds, a, b).unwrap().value;
        let dense = if g.size() == 0 {
            dense_log_marginal(&ds, &g, &indep_sigma(0, tau), a, b)
        } else {
            dense_log_marginal(&ds, &g, &gprior_sigma(&ds, &g, tau), a, b)
        };
        prop_assert!((lib - dense).abs() < 1e-8, "{lib} vs {dense}");
    }

    #[test]
    fn independent_matches_dense(seed in 0u64..10_000, g in subset(6), tau in 0.05f64..200.0, a in 1e-3f64..3.0, b in 1e-3f64..3.0) {
        let ds = instance(seed, 25, 6, &[0.8, 0.0, -0.4, 0.2, 0.0, 0.5], 1.0);
        let lib = log_marginal_indep(&g, tau, &ds, a, b).unwrap().value;
        let dense = dense_log_marginal(&ds, &g, &indep_sigma(g.size(), tau), a, b);
        prop_assert!((lib - dense).abs() < 1e-8, "{lib} vs {dense}");
    }

    #[test]
    fn r_squared_is_bounded_and_monotone(seed in 0u64..10_000, g in subset(6), j in 0usize..6) {
        let ds = instance(seed, 25, 6, &[0.8, 0.0, -0.4, 0.2, 0.0, 0.5], 1.0);
        let r = r_squared(&g, 1.0, &ds, PriorFamily::GPrior).unwrap();
        let bigger = r_squared(&g.with(j), 1.0, &ds, PriorFamily::GPrior).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        prop_assert!(bigger >= r - 1e-10);
    }

    #[test]
    fn model_prior_is_a_distribution(p in 1usize..40, a in 0.05f64..5.0, b in 0.05f64..5.0) {
        let s = spec(PriorFamily::GPrior, TauMode::Fixed(1.0), a, b);
        let total: f64 = (0..=p).map(|k| (ln_binomial(p as u64, k as u64) + log_model_prior_size(k, &s, p)).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for k in 0..=p {
            prop_assert!((log_model_prior_size(k, &s, p) - log_prior(k, p, a, b)).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_one_is_the_prior_conditional(p in 2usize..40, k in 0usize..39, a in 0.05f64..5.0, b in 0.05f64..5.0) {
        prop_assume!(k < p);
        let s = spec(PriorFamily::GPrior, TauMode::Fixed(1.0), a, b);
        let on = log_model_prior_size(k + 1, &s, p);
        let off = log_model_prior_size(k, &s, p);
        let cond = 1.0 / (1.0 + (off - on).exp());
        prop_assert!((theta_one(k + 1, p, &s) - cond).abs() < 1e-10);
        let t1 = theta_tilde(cond, 1.0);
        prop_assert!((t1 - cond).abs() < 1e-12);
        let hot = theta_tilde(cond, 50.0);
        prop_assert!((hot - 0.5).abs() <= (cond - 0.5).abs() + 1e-12);
    }

    #[test]
    fn elicited_hyperparameters_reproduce_moments(p in 10usize..2000, e_frac in 0.01f64..0.5, r in 1.05f64..5.0) {
        let pf = p as f64;
        let e = e_frac * pf;
        let v = r * e * (1.0 - e / pf);
        prop_assume!(r < pf);
        let h = elicit_omega_hyperparams(e, v, p).unwrap();
        let mean = pf * h.a / (h.a + h.b);
        let var = pf * h.a * h.b * (h.a + h.b + pf) / ((h.a + h.b).powi(2) * (h.a + h.b + 1.0));
        prop_assert!((mean - e).abs() < 1e-8 * e.max(1.0));
        prop_assert!((var - v).abs() < 1e-6 * v.max(1.0));
    }

    #[test]
    fn estimators_are_proper(
        models in proptest::collection::vec((subset(7), -50.0f64..0.0), 1..60),
        distinct in any::<bool>(),
    ) {
        let records: Vec<TraceRecord> = models
            .into_iter()
            .enumerate()
            .map(|(i, (g, lp))| TraceRecord { sweep: i, p_gamma: g.size(), gamma: g, log_lik: lp, log_prior: -1.0, r2: 0.5 })
            .collect();
        let w = if distinct { InclusionWeighting::Distinct } else { InclusionWeighting::PerSweep };
        let inc = inclusion_probabilities(&records, 7, w);
        let pmf = model_size_posterior(&records, 7, w);
        prop_assert!(inc.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let mean_size: f64 = pmf.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        prop_assert!((mean_size - inc.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn all_exchange_weights_include_identity(f in proptest::collection::vec(-100.0f64..0.0, 2..8), b in 1.01f64..3.0) {
        let t: Vec<f64> = (0..f.len()).map(|i| b.powi(i as i32)).collect();
        let lw = all_exchange_log_weights(&f, &t);
        let l = f.len();
        prop_assert_eq!(lw.len(), l * (l - 1) / 2 + 1);
        prop_assert_eq!(*lw.last().unwrap(), 0.0);
        let mut k = 0;
        for i in 0..l {
            for j in i + 1..l {
                prop_assert!((lw[k] - stage_one_log_ratio(f[i], f[j], t[i], t[j])).abs() < 1e-9);
                k += 1;
            }
        }
    }

    #[test]
    fn selection_probabilities_normalize(f in proptest::collection::vec(-1e4f64..0.0, 2..10), ts in 1.0f64..100.0) {
        let p = parent_selection_probs(&f, ts);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let best = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert!(p.iter().all(|&v| v <= p[best] + 1e-15));
    }

    #[test]
    fn swap_frequencies_sum(counts in proptest::collection::vec(0u64..1000, 2..8)) {
        let s = swap_frequencies(&counts);
        if counts.iter().sum::<u64>() > 0 {
            prop_assert!((s.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_based_roundtrip(g in subset(30)) {
        let s = g.to_one_based_string();
        prop_assert_eq!(ModelIndicator::parse_one_based(&s, 30).unwrap(), g.clone());
        prop_assert_eq!(ModelIndicator::from_mask(&g.to_mask(30)), g);
    }
}
