//! Posterior summaries and run diagnostics computed from sampler output.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{csv_io, fmt_f64};
use crate::engine::{kind_name, SamplerOutput, TraceRecord, VisitedModel};
use crate::error::{EssError, Result};
use crate::model::ModelIndicator;
use crate::moves::MoveKind;

pub const STABILITY_TOP: usize = 1000;

/// How revisits enter the posterior-weighted estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InclusionWeighting {
    /// Every post-burn-in sweep is an atom; repeats count repeatedly.
    #[default]
    PerSweep,
    /// Each distinct visited model is an atom.
    Distinct,
}

fn atoms(records: &[TraceRecord], weighting: InclusionWeighting) -> Vec<(&ModelIndicator, f64)> {
    match weighting {
        InclusionWeighting::PerSweep => records.iter().map(|r| (&r.gamma, r.log_post())).collect(),
        InclusionWeighting::Distinct => {
            let mut seen: HashMap<&ModelIndicator, usize> = HashMap::new();
            let mut out: Vec<(&ModelIndicator, f64)> = Vec::new();
            for r in records {
                match seen.get(&r.gamma) {
                    Some(&i) => out[i].1 = out[i].1.max(r.log_post()),
                    None => {
                        seen.insert(&r.gamma, out.len());
                        out.push((&r.gamma, r.log_post()));
                    }
                }
            }
            out
        }
    }
}

/// Normalized weights exp(f − max) / Σ.
fn normalized(atoms: &[(&ModelIndicator, f64)]) -> Vec<f64> {
    let m = atoms.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = atoms.iter().map(|a| (a.1 - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Posterior-weighted marginal inclusion probabilities.
pub fn inclusion_probabilities(records: &[TraceRecord], p: usize, weighting: InclusionWeighting) -> Vec<f64> {
    let a = atoms(records, weighting);
    let w = normalized(&a);
    let mut inc = vec![0.0; p];
    for ((g, _), wi) in a.iter().zip(&w) {
        for &j in g.indices() {
            inc[j] += wi;
        }
    }
    inc.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    inc
}

/// Plain visit frequencies.
pub fn frequency_inclusion(records: &[TraceRecord], p: usize) -> Vec<f64> {
    let mut inc = vec![0.0; p];
    for r in records {
        for &j in r.gamma.indices() {
            inc[j] += 1.0;
        }
    }
    let n = records.len().max(1) as f64;
    inc.iter_mut().for_each(|v| *v /= n);
    inc
}

/// Posterior-weighted pmf of p_γ over 0..=p.
pub fn model_size_posterior(records: &[TraceRecord], p: usize, weighting: InclusionWeighting) -> Vec<f64> {
    let a = atoms(records, weighting);
    let w = normalized(&a);
    let mut pmf = vec![0.0; p + 1];
    for ((g, _), wi) in a.iter().zip(&w) {
        pmf[g.size()] += wi;
    }
    pmf
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub value: f64,
    pub records_used: usize,
    /// Fewer than the requested number of records were available.
    pub short: bool,
}

/// Sample sd (N−1) of R² over the best `top` records ranked by log posterior, repeats kept.
pub fn stability_index(records: &[TraceRecord], top: usize) -> Stability {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| records[b].log_post().total_cmp(&records[a].log_post()).then(a.cmp(&b)));
    idx.truncate(top);
    let r2: Vec<f64> = idx.iter().map(|&i| records[i].r2).collect();
    Stability { value: sample_sd(&r2), records_used: r2.len(), short: records.len() < top }
}

fn sample_var(v: &[f64]) -> f64 {
    if v.len() < 2 || v.iter().all(|x| *x == v[0]) {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    sample_var(v).sqrt()
}

/// V(f(γ_l)) (1/t_{l+1} − 1/t_l)² for each adjacent pair.
pub fn overlap_index(chain_log_posts: &[Vec<f64>], temperatures: &[f64]) -> Vec<f64> {
    let l = temperatures.len();
    (0..l.saturating_sub(1))
        .map(|i| {
            let f: Vec<f64> = chain_log_posts.iter().map(|row| row[i]).collect();
            sample_var(&f) * (1.0 / temperatures[i + 1] - 1.0 / temperatures[i]).powi(2)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapFrequencies {
    /// Per-chain share of successful swaps; sums to 2.
    pub participation: Vec<f64>,
    /// The same, rescaled to sum to 1.
    pub normalized: Vec<f64>,
    pub total_swaps: u64,
    /// No successful swaps were observed.
    pub empty: bool,
}

pub fn swap_frequencies(counts: &[u64]) -> SwapFrequencies {
    let slots: u64 = counts.iter().sum();
    if slots == 0 {
        return SwapFrequencies {
            participation: vec![0.0; counts.len()],
            normalized: vec![0.0; counts.len()],
            total_swaps: 0,
            empty: true,
        };
    }
    let swaps = slots as f64 / 2.0;
    SwapFrequencies {
        participation: counts.iter().map(|&c| c as f64 / swaps).collect(),
        normalized: counts.iter().map(|&c| c as f64 / slots as f64).collect(),
        total_swaps: slots / 2,
        empty: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub inclusion: Vec<f64>,
    pub model_size_pmf: Vec<f64>,
    pub top_models: Vec<VisitedModel>,
    pub stability: Stability,
    pub e_tau: Option<f64>,
    pub mode_psize: usize,
    pub overlap: Vec<f64>,
    pub swaps: SwapFrequencies,
    pub weighting: InclusionWeighting,
}

impl PosteriorSummary {
    pub fn from_output(out: &SamplerOutput, weighting: InclusionWeighting) -> Result<Self> {
        let post = out.post_burn_in();
        if post.is_empty() {
            return Err(EssError::config("no post-burn-in records to summarize"));
        }
        let inclusion = inclusion_probabilities(post, out.p, weighting);
        let model_size_pmf = model_size_posterior(post, out.p, weighting);
        let mode_psize = model_size_pmf
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
            .0;
        let e_tau = (!out.config.spec.tau_mode.is_fixed()).then(|| {
            let t = out.post_burn_in_tau();
            t.iter().map(|r| r.tau).sum::<f64>() / t.len() as f64
        });
        Ok(PosteriorSummary {
            inclusion,
            model_size_pmf,
            top_models: out.visited_best.clone(),
            stability: stability_index(post, STABILITY_TOP),
            e_tau,
            mode_psize,
            overlap: overlap_index(&out.chain_log_posts, &out.final_temperatures),
            swaps: swap_frequencies(&out.diagnostics.swap_counts),
            weighting,
        })
    }

    /// MAP model among the distinct visited models.
    pub fn map_model(&self) -> Option<&VisitedModel> {
        self.top_models.first()
    }

    /// Writes inclusion.csv, model_size.csv, top_models.csv and diagnostics.txt.
    pub fn write(&self, out: &SamplerOutput, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| EssError::Io { path: dir.to_path_buf(), source: e })?;
        write_rows(
            &dir.join("inclusion.csv"),
            &["index", "probability"],
            self.inclusion.iter().enumerate().map(|(j, v)| vec![(j + 1).to_string(), fmt_f64(*v)]),
        )?;
        write_rows(
            &dir.join("model_size.csv"),
            &["size", "probability"],
            self.model_size_pmf.iter().enumerate().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]),
        )?;
        write_rows(
            &dir.join("top_models.csv"),
            &["rank", "log_posterior", "r2", "indices"],
            self.top_models.iter().enumerate().map(|(i, m)| {
                vec![(i + 1).to_string(), fmt_f64(m.log_post), fmt_f64(m.r2), m.gamma.to_one_based_string()]
            }),
        )?;
        let path = dir.join("diagnostics.txt");
        fs::write(&path, self.diagnostics_text(out)).map_err(|e| EssError::Io { path, source: e })
    }

    pub fn diagnostics_text(&self, out: &SamplerOutput) -> String {
        let d = &out.diagnostics;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("sweeps", out.config.sweeps.to_string());
        kv("burn_in", out.config.burn_in.to_string());
        kv("chains", out.config.chains.to_string());
        kv("seed", out.config.seed.to_string());
        kv("weighting", format!("{:?}", self.weighting).to_lowercase());
        kv("temperatures", join(&out.final_temperatures));
        kv("mode_psize", self.mode_psize.to_string());
        kv("stability", fmt_f64(self.stability.value));
        kv("stability_records", self.stability.records_used.to_string());
        kv("stability_short", self.stability.short.to_string());
        if let Some(t) = self.e_tau {
            kv("e_tau", fmt_f64(t));
            kv("tau_acceptance", fmt_f64(d.tau_acceptance()));
        }
        kv("dr_exchange_acceptance", fmt_f64(d.dr_acceptance()));
        kv("local_phases", d.local_phases.to_string());
        kv("crossover_phases", d.crossover_phases.to_string());
        kv("dr_exchanges_post", d.dr_exchanges_post.to_string());
        kv("all_exchanges_post", d.all_exchanges_post.to_string());
        kv("nonfinite_rejections", d.nonfinite_rejections().to_string());
        for kind in [
            MoveKind::Fsmh,
            MoveKind::Mc3,
            MoveKind::Gibbs,
            MoveKind::Crossover1pt,
            MoveKind::CrossoverUnif,
            MoveKind::CrossoverAdaptive,
            MoveKind::CrossoverBlock,
            MoveKind::DrExchangeStage1,
            MoveKind::DrExchangeStage2,
            MoveKind::AllExchange,
        ] {
            if let Some(m) = d.moves.get(kind_name(kind)) {
                let name = kind_name(kind);
                kv(&format!("{name}_attempts"), m.attempts.to_string());
                kv(&format!("{name}_accepted"), m.accepted.to_string());
                kv(&format!("{name}_models_evaluated"), m.models_evaluated.to_string());
                if m.proposals > 0 {
                    kv(&format!("{name}_flip_acceptance"), fmt_f64(m.acceptances as f64 / m.proposals as f64));
                }
            }
        }
        kv("overlap", join(&self.overlap));
        kv("swap_frequency", join(&self.swaps.normalized));
        kv("swap_participation", join(&self.swaps.participation));
        kv("swaps_total", self.swaps.total_swaps.to_string());
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub(crate) fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| csv_io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| EssError::Io { path: path.to_path_buf(), source: e })
}

/// Chain-1 trace as a plottable CSV.
pub fn write_trace_csv(out: &SamplerOutput, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["sweep", "log_posterior", "p_gamma", "r2", "tau", "indices"],
        out.model_trace.iter().zip(&out.tau_trace).map(|(r, t)| {
            vec![
                r.sweep.to_string(),
                fmt_f64(r.log_post()),
                r.p_gamma.to_string(),
                fmt_f64(r.r2),
                fmt_f64(t.tau),
                r.gamma.to_one_based_string(),
            ]
        }),
    )
}
