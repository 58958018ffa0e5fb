//! Transition kernels on a population of tempered chains.

mod chain;
mod crossover;
mod exchange;
mod local;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use chain::{ChainState, MoveContext, Population};
pub use crossover::{
    apply_crossover, crossover, parent_selection_probs, select_parents, selection_log_prob, CorrelationIndex,
    CrossoverKind,
};
pub use exchange::{all_exchange, all_exchange_log_weights, dr_exchange, stage_one_log_ratio};
pub use local::{fsmh_scan, gibbs_full_scan, mc3_step, LocalMove};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Gibbs,
    Fsmh,
    Mc3,
    Crossover1pt,
    CrossoverUnif,
    CrossoverAdaptive,
    CrossoverBlock,
    DrExchangeStage1,
    DrExchangeStage2,
    AllExchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    pub chains_touched: (usize, Option<usize>),
    pub models_evaluated: usize,
    /// Individual flip proposals inside a scan (state-change proposals for FSMH).
    pub proposals: usize,
    /// Accepted flips inside a scan.
    pub acceptances: usize,
    /// Accepted without change because the proposal equals the current state.
    pub noop: bool,
    /// Proposals rejected because of a non-finite log-density difference.
    pub nonfinite: usize,
}

impl MoveOutcome {
    pub(crate) fn new(kind: MoveKind, chains_touched: (usize, Option<usize>)) -> Self {
        MoveOutcome {
            kind,
            accepted: false,
            chains_touched,
            models_evaluated: 0,
            proposals: 0,
            acceptances: 0,
            noop: false,
            nonfinite: 0,
        }
    }
}

/// Metropolis decision on the log scale. Non-finite ratios reject and bump the counter.
pub(crate) fn mh_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R, nonfinite: &mut usize) -> bool {
    if log_ratio.is_nan() || log_ratio == f64::INFINITY {
        *nonfinite += 1;
        return false;
    }
    let u: f64 = rng.random();
    log_ratio >= 0.0 || u.ln() < log_ratio
}
