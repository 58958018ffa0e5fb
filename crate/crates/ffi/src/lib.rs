//! C ABI over `ess-core`.
//!
//! Every handle is opaque and owned by the caller, who releases it with the
//! matching `*_free`. Fallible functions return an [`EssStatus`]; the message
//! for the most recent failure on the calling thread is available from
//! [`ess_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ess_core::checkpoint::Checkpoint;
use ess_core::data::Dataset;
use ess_core::engine::{prepare_dataset, RunConfig, Sampler, SamplerOutput};
use ess_core::error::{ErrorKind, EssError};
use ess_core::estimation::{inclusion_probabilities, model_size_posterior, InclusionWeighting};
use ess_core::priors::{elicit_omega_hyperparams, PriorFamily, PriorSpec, TauMode};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
    Io = 5,
    BufferTooSmall = 6,
    InvalidState = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssPrior {
    GPrior = 0,
    Independent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssTau {
    /// τ held at `tau_param`.
    Fixed = 0,
    /// Zellner–Siow, a_τ = 1/2, b_τ = n/2; `tau_param` is ignored.
    ZellnerSiow = 1,
    /// Hyper-g with c_τ = `tau_param`.
    HyperG = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssWeighting {
    PerSweep = 0,
    Distinct = 1,
}

/// Opaque response vector and design matrix.
pub struct EssDataset {
    raw: Dataset,
}

/// Opaque run configuration.
pub struct EssConfig {
    prior: EssPrior,
    tau: EssTau,
    tau_param: f64,
    e_pgamma: f64,
    v_pgamma: f64,
    a_sigma: f64,
    b_sigma: f64,
    sweeps: usize,
    burn_in: usize,
    seed: u64,
    chains: usize,
    parallel: bool,
}

/// Opaque sampler. Owns the prepared data it reads from.
pub struct EssSampler {
    // Declared before `data` so it is dropped first.
    sampler: Option<Sampler<'static>>,
    data: Box<Dataset>,
}

/// Opaque finished run.
pub struct EssOutput {
    out: SamplerOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: EssStatus, msg: impl Into<String>) -> EssStatus {
    set_error(msg.into());
    status
}

fn from_error(e: EssError) -> EssStatus {
    let status = match e.kind() {
        ErrorKind::Config => EssStatus::Config,
        ErrorKind::Data => EssStatus::Data,
        ErrorKind::Numeric => EssStatus::Numeric,
        ErrorKind::Io => EssStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> EssStatus) -> EssStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(EssStatus::Panic, "internal panic"),
    }
}

/// Message for the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ess_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ess_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy `y` (length n) and column-major `x` (n × p) into a new dataset.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n * p` doubles, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ess_dataset_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut EssDataset,
) -> EssStatus {
    guard(|| {
        if y.is_null() || out.is_null() || (x.is_null() && p > 0) {
            return fail(EssStatus::NullPointer, "null argument to ess_dataset_new");
        }
        let Some(len) = n.checked_mul(p) else {
            return fail(EssStatus::Data, "n * p overflows");
        };
        let yv = std::slice::from_raw_parts(y, n).to_vec();
        let xv = if p == 0 { Vec::new() } else { std::slice::from_raw_parts(x, len).to_vec() };
        match Dataset::from_columns(yv, xv, p) {
            Ok(raw) => {
                *out = Box::into_raw(Box::new(EssDataset { raw }));
                EssStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Load a dataset from response and design CSV files.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ess_dataset_load_csv(y_path: *const c_char, x_path: *const c_char, out: *mut *mut EssDataset) -> EssStatus {
    guard(|| {
        let (Some(y), Some(x)) = (c_path(y_path), c_path(x_path)) else {
            return fail(EssStatus::NullPointer, "null or non-UTF-8 path");
        };
        if out.is_null() {
            return fail(EssStatus::NullPointer, "null output pointer");
        }
        match Dataset::load_csv(Path::new(y), Path::new(x)) {
            Ok(raw) => {
                *out = Box::into_raw(Box::new(EssDataset { raw }));
                EssStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `ds` must be NULL or a pointer from `ess_dataset_new`/`ess_dataset_load_csv`.
#[no_mangle]
pub unsafe extern "C" fn ess_dataset_free(ds: *mut EssDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a valid dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ess_dataset_n(ds: *const EssDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.raw.n())
}

/// # Safety
/// `ds` must be a valid dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ess_dataset_p(ds: *const EssDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.raw.p())
}

/// New configuration: g-prior, Zellner–Siow τ, E(p_γ)=5 with binomial
/// variance, a_σ = 1e-6, b_σ = 1e-3, 5 chains.
#[no_mangle]
pub extern "C" fn ess_config_new(sweeps: usize, burn_in: usize, seed: u64) -> *mut EssConfig {
    Box::into_raw(Box::new(EssConfig {
        prior: EssPrior::GPrior,
        tau: EssTau::ZellnerSiow,
        tau_param: 0.0,
        e_pgamma: 5.0,
        v_pgamma: f64::NAN,
        a_sigma: 1e-6,
        b_sigma: 1e-3,
        sweeps,
        burn_in,
        seed,
        chains: 5,
        parallel: true,
    }))
}

/// # Safety
/// `cfg` must be NULL or a pointer from `ess_config_new`.
#[no_mangle]
pub unsafe extern "C" fn ess_config_free(cfg: *mut EssConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ess_config_set_prior(cfg: *mut EssConfig, prior: EssPrior, tau: EssTau, tau_param: f64) -> EssStatus {
    let Some(c) = cfg.as_mut() else { return fail(EssStatus::NullPointer, "null config") };
    c.prior = prior;
    c.tau = tau;
    c.tau_param = tau_param;
    EssStatus::Ok
}

/// Prior mean and variance of the model size. A NaN variance selects the
/// binomial variance.
///
/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ess_config_set_model_size(cfg: *mut EssConfig, e_pgamma: f64, v_pgamma: f64) -> EssStatus {
    let Some(c) = cfg.as_mut() else { return fail(EssStatus::NullPointer, "null config") };
    c.e_pgamma = e_pgamma;
    c.v_pgamma = v_pgamma;
    EssStatus::Ok
}

/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ess_config_set_sigma(cfg: *mut EssConfig, a_sigma: f64, b_sigma: f64) -> EssStatus {
    let Some(c) = cfg.as_mut() else { return fail(EssStatus::NullPointer, "null config") };
    c.a_sigma = a_sigma;
    c.b_sigma = b_sigma;
    EssStatus::Ok
}

/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ess_config_set_chains(cfg: *mut EssConfig, chains: usize, parallel: bool) -> EssStatus {
    let Some(c) = cfg.as_mut() else { return fail(EssStatus::NullPointer, "null config") };
    c.chains = chains;
    c.parallel = parallel;
    EssStatus::Ok
}

fn build(cfg: &EssConfig, n: usize, p: usize) -> Result<RunConfig, EssError> {
    let family = match cfg.prior {
        EssPrior::GPrior => PriorFamily::GPrior,
        EssPrior::Independent => PriorFamily::Independent,
    };
    let tau = match cfg.tau {
        EssTau::Fixed => TauMode::Fixed(cfg.tau_param),
        EssTau::ZellnerSiow => TauMode::zellner_siow_default(n),
        EssTau::HyperG => TauMode::HyperG { c_tau: cfg.tau_param },
    };
    let pf = p as f64;
    let v = if cfg.v_pgamma.is_nan() { cfg.e_pgamma * (1.0 - cfg.e_pgamma / pf) } else { cfg.v_pgamma };
    let omega = elicit_omega_hyperparams(cfg.e_pgamma, v, p)?;
    let mut spec = PriorSpec::new(family, tau, omega);
    spec.a_sigma = cfg.a_sigma;
    spec.b_sigma = cfg.b_sigma;
    let mut rc = RunConfig::new(spec, cfg.sweeps, cfg.burn_in, cfg.seed);
    rc.chains = cfg.chains;
    rc.parallel = cfg.parallel;
    rc.validate()?;
    Ok(rc)
}

fn wrap(data: Box<Dataset>, make: impl FnOnce(&'static Dataset) -> Result<Sampler<'static>, EssError>) -> Result<*mut EssSampler, EssError> {
    // SAFETY: the box is never moved out of or mutated while `sampler` lives,
    // and `EssSampler` drops `sampler` before `data`.
    let ds: &'static Dataset = unsafe { &*(data.as_ref() as *const Dataset) };
    let sampler = make(ds)?;
    Ok(Box::into_raw(Box::new(EssSampler { sampler: Some(sampler), data })))
}

/// Center (and, for the independent prior, standardize) a copy of the data
/// and initialise a sampler on it.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_new(cfg: *const EssConfig, ds: *const EssDataset, out: *mut *mut EssSampler) -> EssStatus {
    guard(|| {
        let (Some(c), Some(d)) = (cfg.as_ref(), ds.as_ref()) else {
            return fail(EssStatus::NullPointer, "null config or dataset");
        };
        if out.is_null() {
            return fail(EssStatus::NullPointer, "null output pointer");
        }
        let res = build(c, d.raw.n(), d.raw.p())
            .and_then(|rc| Ok((prepare_dataset(&d.raw, rc.spec.family)?, rc)))
            .and_then(|(prepared, rc)| wrap(Box::new(prepared), |ds| Sampler::new(rc, ds)));
        match res {
            Ok(s) => {
                *out = s;
                EssStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Rebuild a sampler from a checkpoint file written for the same dataset.
///
/// # Safety
/// `path` must be NUL-terminated UTF-8; handles must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_resume(path: *const c_char, ds: *const EssDataset, out: *mut *mut EssSampler) -> EssStatus {
    guard(|| {
        let Some(path) = c_path(path) else { return fail(EssStatus::NullPointer, "null or non-UTF-8 path") };
        let Some(d) = ds.as_ref() else { return fail(EssStatus::NullPointer, "null dataset") };
        if out.is_null() {
            return fail(EssStatus::NullPointer, "null output pointer");
        }
        let res = Checkpoint::load(Path::new(path))
            .and_then(|ck| Ok((prepare_dataset(&d.raw, ck.config.spec.family)?, ck)))
            .and_then(|(prepared, ck)| wrap(Box::new(prepared), |ds| ck.into_sampler(ds)));
        match res {
            Ok(s) => {
                *out = s;
                EssStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or a sampler handle.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_free(s: *mut EssSampler) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn live<'a>(s: *mut EssSampler) -> Result<&'a mut Sampler<'static>, EssStatus> {
    match s.as_mut() {
        None => Err(fail(EssStatus::NullPointer, "null sampler")),
        Some(h) => h.sampler.as_mut().ok_or_else(|| fail(EssStatus::InvalidState, "sampler already finished")),
    }
}

/// Advance until `sweep` sweeps have completed (capped at the configured total).
///
/// # Safety
/// `s` must be a valid sampler handle.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_run_to(s: *mut EssSampler, sweep: usize) -> EssStatus {
    guard(|| match live(s) {
        Err(st) => st,
        Ok(sm) => {
            let target = sweep.min(sm.config().sweeps);
            match sm.run_to(target) {
                Ok(()) => EssStatus::Ok,
                Err(e) => from_error(e),
            }
        }
    })
}

/// Number of completed sweeps, or `SIZE_MAX` for an invalid handle.
///
/// # Safety
/// `s` must be a valid sampler handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_next_sweep(s: *mut EssSampler) -> usize {
    live(s).map_or(usize::MAX, |sm| sm.next_sweep())
}

/// # Safety
/// `s` must be a valid sampler handle; `path` NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_checkpoint(s: *mut EssSampler, path: *const c_char) -> EssStatus {
    guard(|| {
        let Some(path) = c_path(path) else { return fail(EssStatus::NullPointer, "null or non-UTF-8 path") };
        let sm = match live(s) {
            Ok(sm) => sm,
            Err(st) => return st,
        };
        let data = &(*s).data;
        match Checkpoint::capture(sm, data).save(Path::new(path)) {
            Ok(()) => EssStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Run any remaining sweeps and hand back the output. The sampler handle
/// stays allocated but can no longer be advanced.
///
/// # Safety
/// `s` must be a valid sampler handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ess_sampler_finish(s: *mut EssSampler, out: *mut *mut EssOutput) -> EssStatus {
    guard(|| {
        if out.is_null() {
            return fail(EssStatus::NullPointer, "null output pointer");
        }
        let h = match s.as_mut() {
            Some(h) => h,
            None => return fail(EssStatus::NullPointer, "null sampler"),
        };
        let Some(sm) = h.sampler.take() else { return fail(EssStatus::InvalidState, "sampler already finished") };
        match sm.run() {
            Ok(o) => {
                *out = Box::into_raw(Box::new(EssOutput { out: o }));
                EssStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `o` must be NULL or an output handle.
#[no_mangle]
pub unsafe extern "C" fn ess_output_free(o: *mut EssOutput) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

fn weighting(w: EssWeighting) -> InclusionWeighting {
    match w {
        EssWeighting::PerSweep => InclusionWeighting::PerSweep,
        EssWeighting::Distinct => InclusionWeighting::Distinct,
    }
}

unsafe fn fill(values: &[f64], buf: *mut f64, len: usize) -> EssStatus {
    if buf.is_null() {
        return fail(EssStatus::NullPointer, "null buffer");
    }
    if len < values.len() {
        return fail(EssStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", values.len()));
    }
    std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
    EssStatus::Ok
}

/// Marginal inclusion probabilities into `buf` (length ≥ p).
///
/// # Safety
/// `o` must be a valid output handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ess_output_inclusion(o: *const EssOutput, w: EssWeighting, buf: *mut f64, len: usize) -> EssStatus {
    guard(|| {
        let Some(o) = o.as_ref() else { return fail(EssStatus::NullPointer, "null output") };
        fill(&inclusion_probabilities(o.out.post_burn_in(), o.out.p, weighting(w)), buf, len)
    })
}

/// Posterior of the model size into `buf` (length ≥ p + 1).
///
/// # Safety
/// `o` must be a valid output handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ess_output_model_size(o: *const EssOutput, w: EssWeighting, buf: *mut f64, len: usize) -> EssStatus {
    guard(|| {
        let Some(o) = o.as_ref() else { return fail(EssStatus::NullPointer, "null output") };
        fill(&model_size_posterior(o.out.post_burn_in(), o.out.p, weighting(w)), buf, len)
    })
}

/// Highest-posterior visited model: 0-based indices into `idx`, its size into
/// `size`, and its R² into `r2`. With a too-small buffer `size` is still set.
///
/// # Safety
/// `o` must be valid; `idx` must hold `cap` entries; `size` and `r2` writable.
#[no_mangle]
pub unsafe extern "C" fn ess_output_best_model(
    o: *const EssOutput,
    idx: *mut usize,
    cap: usize,
    size: *mut usize,
    r2: *mut f64,
) -> EssStatus {
    guard(|| {
        let Some(o) = o.as_ref() else { return fail(EssStatus::NullPointer, "null output") };
        if size.is_null() || r2.is_null() {
            return fail(EssStatus::NullPointer, "null size or r2 pointer");
        }
        let Some(best) = o.out.visited_best.first() else {
            return fail(EssStatus::InvalidState, "no post-burn-in models were recorded");
        };
        let ind = best.gamma.indices();
        *size = ind.len();
        *r2 = best.r2;
        if ind.is_empty() {
            return EssStatus::Ok;
        }
        if idx.is_null() {
            return fail(EssStatus::NullPointer, "null index buffer");
        }
        if cap < ind.len() {
            return fail(EssStatus::BufferTooSmall, format!("buffer holds {cap} indices, {} needed", ind.len()));
        }
        std::slice::from_raw_parts_mut(idx, ind.len()).copy_from_slice(ind);
        EssStatus::Ok
    })
}

/// Post-burn-in DR-exchange acceptance rate (NaN for a null handle).
///
/// # Safety
/// `o` must be a valid output handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ess_output_exchange_acceptance(o: *const EssOutput) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.out.diagnostics.dr_acceptance())
}

/// Number of recorded post-burn-in sweeps.
///
/// # Safety
/// `o` must be a valid output handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ess_output_len(o: *const EssOutput) -> usize {
    o.as_ref().map_or(0, |o| o.out.post_burn_in().len())
}

unsafe fn c_path<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        None
    } else {
        CStr::from_ptr(p).to_str().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_status() {
        assert_eq!(from_error(EssError::config("x")), EssStatus::Config);
        assert_eq!(from_error(EssError::numeric("x")), EssStatus::Numeric);
        assert_eq!(from_error(EssError::ZeroVariance(2)), EssStatus::Data);
        let nested = EssError::AtSweep { sweep: 3, source: Box::new(EssError::numeric("y")) };
        assert_eq!(from_error(nested), EssStatus::Numeric);
        let msg = unsafe { CStr::from_ptr(ess_last_error()) }.to_str().unwrap();
        assert!(msg.contains("at sweep 3"));
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), EssStatus::Panic);
    }

    #[test]
    fn default_variance_is_binomial() {
        let cfg = unsafe { Box::from_raw(ess_config_new(300, 100, 1)) };
        let rc = build(&cfg, 50, 20).unwrap();
        let mu: f64 = 5.0 / 20.0;
        let s = rc.spec.a_omega + rc.spec.b_omega;
        assert!((rc.spec.a_omega / s - mu).abs() < 1e-12);
        assert!(s >= 1e5);
    }
}
