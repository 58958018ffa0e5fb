//! The sampler driver: sweep scheduling, burn-in protocol, RNG streams and traces.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{burn_in_batches, tau_mwg_step, TauProposalState, TemperatureLadder, DEFAULT_BATCH_SIZE};
use crate::data::Dataset;
use crate::error::{EssError, Result};
use crate::likelihood::Evaluator;
use crate::model::ModelIndicator;
use crate::moves::{
    all_exchange, crossover, dr_exchange, fsmh_scan, gibbs_full_scan, mc3_step, ChainState, CorrelationIndex,
    CrossoverKind, LocalMove, MoveContext, MoveKind, MoveOutcome, Population,
};
use crate::priors::{PriorFamily, PriorSpec, TauMode};

pub const DEFAULT_TOP_K: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionTemperature {
    /// The hottest temperature of the current ladder.
    LadderMax,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Total sweeps, burn-in included.
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub b1: f64,
    pub local_move: LocalMove,
    /// Local steps per chain in a local phase (MC³ budget matching).
    pub local_steps: usize,
    pub crossovers: Vec<CrossoverKind>,
    pub rho0: f64,
    /// Full Gibbs scan on chain 1 every this many sweeps; 0 disables it.
    pub gibbs_interval: usize,
    pub seed: u64,
    pub spec: PriorSpec,
    pub selection_temperature: SelectionTemperature,
    pub batch_size: usize,
    /// Enables the all-exchange operator after burn-in.
    pub all_exchange: bool,
    /// Starting τ for sampled-τ modes; `None` uses the prior mode (Z-S) or 1.
    pub tau_init: Option<f64>,
    pub ls1: f64,
    pub top_k: usize,
    /// Run the local phase on the rayon pool.
    pub parallel: bool,
    /// Keep every chain's f(γ|τ) after burn-in (needed for overlap indices).
    pub record_all_chains: bool,
}

impl RunConfig {
    pub fn new(spec: PriorSpec, sweeps: usize, burn_in: usize, seed: u64) -> Self {
        RunConfig {
            sweeps,
            burn_in,
            chains: 5,
            b1: 4.0,
            local_move: LocalMove::Fsmh,
            local_steps: 1,
            crossovers: CrossoverKind::ALL.to_vec(),
            rho0: 0.25,
            gibbs_interval: 100,
            seed,
            spec,
            selection_temperature: SelectionTemperature::LadderMax,
            batch_size: DEFAULT_BATCH_SIZE,
            all_exchange: true,
            tau_init: None,
            ls1: 0.0,
            top_k: DEFAULT_TOP_K,
            parallel: true,
            record_all_chains: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.chains < 3 {
            return Err(EssError::config(format!("at least 3 chains are required (got {})", self.chains)));
        }
        if self.batch_size == 0 {
            return Err(EssError::config("batch size must be positive"));
        }
        if !(self.sweeps > self.burn_in && self.burn_in >= self.batch_size) {
            return Err(EssError::config(format!(
                "need sweeps > burn-in >= batch size (sweeps={}, burn-in={}, batch={})",
                self.sweeps, self.burn_in, self.batch_size
            )));
        }
        if self.crossovers.is_empty() {
            return Err(EssError::config("at least one crossover operator is required"));
        }
        if !(0.0..=1.0).contains(&self.rho0) {
            return Err(EssError::config("rho0 must lie in [0, 1]"));
        }
        if self.local_steps == 0 {
            return Err(EssError::config("local steps must be positive"));
        }
        if let SelectionTemperature::Fixed(t) = self.selection_temperature {
            if !(t > 0.0) {
                return Err(EssError::config("selection temperature must be positive"));
            }
        }
        if let Some(t) = self.tau_init {
            if !(t > 0.0 && t.is_finite()) {
                return Err(EssError::config("initial tau must be positive"));
            }
        }
        Ok(())
    }

    fn initial_tau(&self) -> f64 {
        match self.spec.tau_mode {
            TauMode::Fixed(t) => t,
            TauMode::ZellnerSiow { a_tau, b_tau } => self.tau_init.unwrap_or(b_tau / (a_tau + 1.0)),
            TauMode::HyperG { .. } => self.tau_init.unwrap_or(1.0),
        }
    }
}

/// Center, and standardize for the independent family.
pub fn prepare_dataset(ds: &Dataset, family: PriorFamily) -> Result<Dataset> {
    let c = ds.center();
    match family {
        PriorFamily::GPrior => Ok(c),
        PriorFamily::Independent => c.standardize(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sweep: usize,
    pub gamma: ModelIndicator,
    pub log_lik: f64,
    pub log_prior: f64,
    pub p_gamma: usize,
    pub r2: f64,
}

impl TraceRecord {
    pub fn log_post(&self) -> f64 {
        self.log_lik + self.log_prior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub sweep: usize,
    pub tau: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempts: u64,
    pub accepted: u64,
    pub noops: u64,
    pub models_evaluated: u64,
    pub proposals: u64,
    pub acceptances: u64,
    pub nonfinite: u64,
}

impl MoveStats {
    fn record(&mut self, o: &MoveOutcome) {
        self.attempts += 1;
        self.accepted += u64::from(o.accepted);
        self.noops += u64::from(o.noop);
        self.models_evaluated += o.models_evaluated as u64;
        self.proposals += o.proposals as u64;
        self.acceptances += o.acceptances as u64;
        self.nonfinite += o.nonfinite as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub end_sweep: usize,
    pub b: f64,
    pub dr_acceptance: f64,
    pub all_exchange_acceptance: Option<f64>,
    pub tau_acceptance: Option<f64>,
    pub log_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub burn_in_moves: BTreeMap<String, MoveStats>,
    pub moves: BTreeMap<String, MoveStats>,
    pub local_phases: u64,
    pub crossover_phases: u64,
    pub dr_exchanges_post: u64,
    pub all_exchanges_post: u64,
    /// Successful swaps each chain took part in, after burn-in.
    pub swap_counts: Vec<u64>,
    pub tau_attempts: u64,
    pub tau_accepts: u64,
    pub batches: Vec<BatchRecord>,
}

impl Diagnostics {
    fn record(&mut self, o: &MoveOutcome, post: bool) {
        let map = if post { &mut self.moves } else { &mut self.burn_in_moves };
        map.entry(kind_name(o.kind).to_string()).or_default().record(o);
    }

    fn combined(&self, post: bool, kinds: &[MoveKind]) -> (u64, u64) {
        let map = if post { &self.moves } else { &self.burn_in_moves };
        kinds.iter().filter_map(|k| map.get(kind_name(*k))).fold((0, 0), |a, s| (a.0 + s.attempts, a.1 + s.accepted))
    }

    /// Post-burn-in DR-exchange acceptance (either stage).
    pub fn dr_acceptance(&self) -> f64 {
        let (n, a) = self.combined(true, &[MoveKind::DrExchangeStage1, MoveKind::DrExchangeStage2]);
        if n == 0 { f64::NAN } else { a as f64 / n as f64 }
    }

    /// Post-burn-in τ acceptance.
    pub fn tau_acceptance(&self) -> f64 {
        if self.tau_attempts == 0 { f64::NAN } else { self.tau_accepts as f64 / self.tau_attempts as f64 }
    }

    pub fn nonfinite_rejections(&self) -> u64 {
        self.moves.values().chain(self.burn_in_moves.values()).map(|s| s.nonfinite).sum()
    }
}

pub fn kind_name(k: MoveKind) -> &'static str {
    match k {
        MoveKind::Gibbs => "gibbs",
        MoveKind::Fsmh => "fsmh",
        MoveKind::Mc3 => "mc3",
        MoveKind::Crossover1pt => "crossover_1pt",
        MoveKind::CrossoverUnif => "crossover_uniform",
        MoveKind::CrossoverAdaptive => "crossover_adaptive",
        MoveKind::CrossoverBlock => "crossover_block",
        MoveKind::DrExchangeStage1 => "dr_exchange_stage1",
        MoveKind::DrExchangeStage2 => "dr_exchange_stage2",
        MoveKind::AllExchange => "all_exchange",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitedModel {
    pub gamma: ModelIndicator,
    pub log_post: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerOutput {
    pub config: RunConfig,
    pub n: usize,
    pub p: usize,
    /// Chain-1 state after every sweep, burn-in included.
    pub model_trace: Vec<TraceRecord>,
    /// Per-sweep τ; constant and never accepted when τ is fixed.
    pub tau_trace: Vec<TauRecord>,
    /// f(γ_l|τ) for every chain after each post-burn-in sweep (if recorded).
    pub chain_log_posts: Vec<Vec<f64>>,
    pub final_temperatures: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// Distinct post-burn-in chain-1 models, best first.
    pub visited_best: Vec<VisitedModel>,
}

impl SamplerOutput {
    pub fn post_burn_in(&self) -> &[TraceRecord] {
        let start = self.model_trace.partition_point(|r| r.sweep < self.config.burn_in);
        &self.model_trace[start..]
    }

    pub fn post_burn_in_tau(&self) -> &[TauRecord] {
        let start = self.tau_trace.partition_point(|r| r.sweep < self.config.burn_in);
        &self.tau_trace[start..]
    }
}

/// Full resumable sampler state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub next_sweep: usize,
    pub population: Population,
    pub ladder: TemperatureLadder,
    pub tau_state: TauProposalState,
    pub chain_rngs: Vec<ChaCha8Rng>,
    pub global_rng: ChaCha8Rng,
    pub model_trace: Vec<TraceRecord>,
    pub tau_trace: Vec<TauRecord>,
    pub chain_log_posts: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub visited: Vec<VisitedModel>,
    pub batch_dr: (u64, u64),
    pub batch_all: (u64, u64),
}

pub struct Sampler<'a> {
    config: RunConfig,
    ds: &'a Dataset,
    corr: Option<CorrelationIndex>,
    state: EngineState,
    visited: HashMap<ModelIndicator, (f64, f64)>,
    last_r2: Option<(ModelIndicator, f64, f64)>,
}

fn chain_rng(seed: u64, l: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ l as u64)
}

fn global_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

impl<'a> Sampler<'a> {
    pub fn new(config: RunConfig, ds: &'a Dataset) -> Result<Self> {
        config.validate()?;
        check_prepared(ds, &config.spec)?;
        let ladder = TemperatureLadder::new(config.chains, config.b1, config.burn_in, config.batch_size)?;
        let tau = config.initial_tau();
        let ev = Evaluator::new(ds, &config.spec);
        let ctx = MoveContext::new(ev, &config.spec, tau);
        let models = vec![ModelIndicator::empty(); config.chains];
        let population = Population::new(models, ladder.temperatures(), &ctx)?;
        let k_tilde = burn_in_batches(config.burn_in, config.batch_size);
        let state = EngineState {
            next_sweep: 0,
            population,
            tau_state: TauProposalState::new(config.ls1, k_tilde),
            ladder,
            chain_rngs: (0..config.chains).map(|l| chain_rng(config.seed, l)).collect(),
            global_rng: global_rng(config.seed),
            model_trace: Vec::with_capacity(config.sweeps),
            tau_trace: Vec::new(),
            chain_log_posts: Vec::new(),
            diagnostics: Diagnostics { swap_counts: vec![0; config.chains], ..Default::default() },
            visited: Vec::new(),
            batch_dr: (0, 0),
            batch_all: (0, 0),
        };
        Ok(Self::assemble(config, ds, state))
    }

    /// Continue from a saved state; the dataset must be the one the state was built on.
    pub fn resume(config: RunConfig, ds: &'a Dataset, state: EngineState) -> Result<Self> {
        config.validate()?;
        check_prepared(ds, &config.spec)?;
        if state.population.len() != config.chains || state.chain_rngs.len() != config.chains {
            return Err(EssError::Checkpoint("chain count does not match the configuration".into()));
        }
        if let Some(bad) = state.population.chains.iter().flat_map(|c| c.gamma.indices()).find(|&&j| j >= ds.p()) {
            return Err(EssError::Checkpoint(format!("model index {bad} out of range for p={}", ds.p())));
        }
        Ok(Self::assemble(config, ds, state))
    }

    fn assemble(config: RunConfig, ds: &'a Dataset, state: EngineState) -> Self {
        let corr = config.crossovers.contains(&CrossoverKind::Block).then(|| CorrelationIndex::new(ds, config.rho0));
        let visited = state.visited.iter().map(|v| (v.gamma.clone(), (v.log_post, v.r2))).collect();
        Sampler { config, ds, corr, state, visited, last_r2: None }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn next_sweep(&self) -> usize {
        self.state.next_sweep
    }

    pub fn is_done(&self) -> bool {
        self.state.next_sweep >= self.config.sweeps
    }

    pub fn population(&self) -> &Population {
        &self.state.population
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.state.ladder
    }

    /// Snapshot for checkpointing.
    pub fn state(&self) -> EngineState {
        let mut s = self.state.clone();
        s.visited = self.sorted_visited(usize::MAX);
        s
    }

    fn sorted_visited(&self, k: usize) -> Vec<VisitedModel> {
        let mut v: Vec<VisitedModel> = self
            .visited
            .iter()
            .map(|(g, &(lp, r2))| VisitedModel { gamma: g.clone(), log_post: lp, r2 })
            .collect();
        v.sort_by(|a, b| b.log_post.total_cmp(&a.log_post).then_with(|| a.gamma.cmp(&b.gamma)));
        v.truncate(k);
        v
    }

    pub fn run_to(&mut self, sweep: usize) -> Result<()> {
        while self.state.next_sweep < sweep.min(self.config.sweeps) {
            let s = self.state.next_sweep;
            self.sweep().map_err(|e| EssError::AtSweep { sweep: s, source: Box::new(e) })?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<SamplerOutput> {
        self.run_to(self.config.sweeps)?;
        Ok(self.finish())
    }

    pub fn finish(self) -> SamplerOutput {
        let visited_best = self.sorted_visited(self.config.top_k);
        SamplerOutput {
            n: self.ds.n(),
            p: self.ds.p(),
            model_trace: self.state.model_trace,
            tau_trace: self.state.tau_trace,
            chain_log_posts: self.state.chain_log_posts,
            final_temperatures: self.state.ladder.temperatures().to_vec(),
            diagnostics: self.state.diagnostics,
            visited_best,
            config: self.config,
        }
    }

    fn selection_temperature(&self) -> f64 {
        match self.config.selection_temperature {
            SelectionTemperature::LadderMax => self.state.ladder.hottest(),
            SelectionTemperature::Fixed(t) => t,
        }
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        let sweep = self.state.next_sweep;
        let post = sweep >= self.config.burn_in;
        let cfg = &self.config;
        let ev = Evaluator::new(self.ds, &cfg.spec);
        let ctx = MoveContext::new(ev, &cfg.spec, self.state.population.tau);
        let t_sel = self.selection_temperature();
        let st = &mut self.state;

        // (i) local phase on every chain, or one crossover
        if st.global_rng.random_bool(0.5) {
            st.diagnostics.local_phases += 1;
            let kind = cfg.local_move;
            let steps = cfg.local_steps;
            let work = |(i, (chain, rng)): (usize, (&mut ChainState, &mut ChaCha8Rng))| -> Result<Vec<MoveOutcome>> {
                (0..steps)
                    .map(|_| match kind {
                        LocalMove::Fsmh => fsmh_scan(chain, i, &ctx, rng),
                        LocalMove::Mc3 => mc3_step(chain, i, &ctx, rng),
                        LocalMove::Gibbs => gibbs_full_scan(chain, i, &ctx, rng),
                    })
                    .collect()
            };
            let outcomes: Vec<Vec<MoveOutcome>> = if cfg.parallel {
                st.population.chains.par_iter_mut().zip(st.chain_rngs.par_iter_mut()).enumerate().map(work).collect::<Result<_>>()?
            } else {
                st.population.chains.iter_mut().zip(st.chain_rngs.iter_mut()).enumerate().map(work).collect::<Result<_>>()?
            };
            for o in outcomes.iter().flatten() {
                st.diagnostics.record(o, post);
            }
        } else {
            st.diagnostics.crossover_phases += 1;
            let kind = cfg.crossovers[st.global_rng.random_range(0..cfg.crossovers.len())];
            let o = crossover(&mut st.population, kind, &ctx, t_sel, self.corr.as_ref(), &mut st.global_rng)?;
            st.diagnostics.record(&o, post);
        }

        // (ii) exchange
        let use_all = post && cfg.all_exchange && st.global_rng.random_bool(0.5);
        let o = if use_all {
            st.diagnostics.all_exchanges_post += 1;
            st.batch_all.0 += 1;
            all_exchange(&mut st.population, &mut st.global_rng)
        } else {
            if post {
                st.diagnostics.dr_exchanges_post += 1;
            }
            st.batch_dr.0 += 1;
            dr_exchange(&mut st.population, &mut st.global_rng)
        };
        if o.accepted {
            if use_all {
                st.batch_all.1 += 1;
            } else {
                st.batch_dr.1 += 1;
            }
            if post {
                let (a, b) = o.chains_touched;
                st.diagnostics.swap_counts[a] += 1;
                if let Some(b) = b {
                    st.diagnostics.swap_counts[b] += 1;
                }
            }
        }
        st.diagnostics.record(&o, post);

        // (iii) τ update
        if !cfg.spec.tau_mode.is_fixed() {
            let (tau, acc) = tau_mwg_step(&mut st.population, &ctx, &st.tau_state, &mut st.global_rng)?;
            st.tau_state.observe(acc);
            if post {
                st.diagnostics.tau_attempts += 1;
                st.diagnostics.tau_accepts += u64::from(acc);
            }
            st.tau_trace.push(TauRecord { sweep, tau, accepted: acc });
        } else {
            st.tau_trace.push(TauRecord { sweep, tau: st.population.tau, accepted: false });
        }

        // periodic Gibbs scan on chain 1
        if cfg.gibbs_interval > 0 && (sweep + 1) % cfg.gibbs_interval == 0 {
            let ctx = MoveContext::new(ev, &cfg.spec, st.population.tau);
            let o = gibbs_full_scan(&mut st.population.chains[0], 0, &ctx, &mut st.chain_rngs[0])?;
            st.diagnostics.record(&o, post);
        }

        // batch-boundary adaptation
        if (sweep + 1) % cfg.batch_size == 0 {
            let dr_rate = if st.batch_dr.0 == 0 { f64::NAN } else { st.batch_dr.1 as f64 / st.batch_dr.0 as f64 };
            let all_rate = (st.batch_all.0 > 0).then(|| st.batch_all.1 as f64 / st.batch_all.0 as f64);
            if !post && !st.ladder.frozen {
                st.ladder.update(dr_rate)?;
                st.population.set_temperatures(st.ladder.temperatures());
            }
            let (tau_rate, log_sd) = if cfg.spec.tau_mode.is_fixed() {
                (None, None)
            } else {
                let r = st.tau_state.end_batch();
                (Some(r), Some(st.tau_state.log_sd))
            };
            st.diagnostics.batches.push(BatchRecord {
                batch: (sweep + 1) / cfg.batch_size,
                end_sweep: sweep,
                b: st.ladder.b(),
                dr_acceptance: dr_rate,
                all_exchange_acceptance: all_rate,
                tau_acceptance: tau_rate,
                log_sd,
            });
            st.batch_dr = (0, 0);
            st.batch_all = (0, 0);
        }
        if sweep + 1 == cfg.burn_in {
            st.ladder.freeze();
        }

        // record chain 1
        let c1 = &st.population.chains[0];
        let tau = st.population.tau;
        let r2 = match &self.last_r2 {
            Some((g, t, r)) if *g == c1.gamma && (*t == tau || cfg.spec.family == PriorFamily::GPrior && cfg.spec.tau_mode.is_fixed()) => *r,
            _ => {
                let r = r2_for(&ev, c1, tau)?;
                self.last_r2 = Some((c1.gamma.clone(), tau, r));
                r
            }
        };
        st.model_trace.push(TraceRecord {
            sweep,
            gamma: c1.gamma.clone(),
            log_lik: c1.log_lik,
            log_prior: c1.log_prior,
            p_gamma: c1.gamma.size(),
            r2,
        });
        if post {
            let lp = c1.log_post();
            let e = self.visited.entry(c1.gamma.clone()).or_insert((lp, r2));
            if lp > e.0 {
                *e = (lp, r2);
            }
            if cfg.record_all_chains {
                st.chain_log_posts.push(st.population.log_posts());
            }
        }
        st.next_sweep += 1;
        Ok(())
    }
}

fn r2_for(ev: &Evaluator, c: &ChainState, tau: f64) -> Result<f64> {
    let yty = ev.dataset().yty();
    match ev.family() {
        PriorFamily::GPrior => Ok(tau / (1.0 + tau) * c.fit.proj / yty),
        PriorFamily::Independent => ev.r_squared(&c.gamma, tau),
    }
}

fn check_prepared(ds: &Dataset, spec: &PriorSpec) -> Result<()> {
    if !ds.is_centered() {
        return Err(EssError::config("dataset must be centered before sampling"));
    }
    if spec.family == PriorFamily::Independent && !ds.is_standardized() {
        return Err(EssError::config("the independent prior requires a standardized design"));
    }
    if !(ds.yty() > 0.0) {
        return Err(EssError::config("response has zero variance"));
    }
    Ok(())
}

/// Run the sampler from scratch.
pub fn run_ess(config: RunConfig, ds: &Dataset) -> Result<SamplerOutput> {
    Sampler::new(config, ds)?.run()
}
