//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::data::Dataset;
use crate::engine::{prepare_dataset, RunConfig, Sampler, SamplerOutput, SelectionTemperature};
use crate::enumerate::enumerate_posterior;
use crate::error::{ErrorKind, EssError, Result};
use crate::estimation::{write_rows, write_trace_csv, InclusionWeighting, PosteriorSummary};
use crate::moves::{CrossoverKind, LocalMove};
use crate::priors::{elicit_omega_hyperparams, OmegaHyper, PriorFamily, PriorSpec, TauMode};
use crate::simgen::{gen_example, CustomDesign, CustomSpec, Example, SimSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "ess", version, about = "Evolutionary stochastic search for Bayesian variable selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the sampler and write traces and summaries.
    Run(RunArgs),
    /// Generate a simulated dataset.
    Simgen(SimgenArgs),
    /// Recompute summaries from a saved run.
    Summarize(SummarizeArgs),
    /// Exact posterior by enumerating all models (p <= 20).
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Response CSV (one column, header row).
    #[arg(long, requires = "x", conflicts_with = "example")]
    pub y: Option<PathBuf>,
    /// Design CSV (n rows, p columns, header row).
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    /// Simulated example instead of files.
    #[arg(long, value_parser = parse_example)]
    pub example: Option<Example>,
}

#[derive(Args, Debug, Clone)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value_t = PriorArg::G)]
    pub prior: PriorArg,
    /// fixed:FLOAT, zs, or hyperg:FLOAT.
    #[arg(long, default_value = "zs")]
    pub tau: String,
    #[arg(long = "e-pgamma")]
    pub e_pgamma: Option<f64>,
    #[arg(long = "v-pgamma", requires = "e_pgamma")]
    pub v_pgamma: Option<f64>,
    #[arg(long = "a-sigma", default_value_t = 1e-6)]
    pub a_sigma: f64,
    #[arg(long = "b-sigma", default_value_t = 1e-3)]
    pub b_sigma: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorArg {
    G,
    Indep,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalArg {
    Fsmh,
    Mc3,
    Gibbs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingArg {
    PerSweep,
    Distinct,
}

impl From<WeightingArg> for InclusionWeighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::PerSweep => InclusionWeighting::PerSweep,
            WeightingArg::Distinct => InclusionWeighting::Distinct,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 5)]
    pub chains: usize,
    #[arg(long)]
    pub sweeps: usize,
    #[arg(long)]
    pub burnin: usize,
    #[arg(long, default_value_t = 4.0)]
    pub b1: f64,
    #[arg(long, value_enum, default_value_t = LocalArg::Fsmh)]
    pub local: LocalArg,
    /// Local steps per chain in each local phase.
    #[arg(long = "local-steps", default_value_t = 1)]
    pub local_steps: usize,
    /// Comma-separated subset of 1pt,uniform,adaptive,block.
    #[arg(long, default_value = "1pt,uniform,adaptive,block")]
    pub crossovers: String,
    #[arg(long, default_value_t = 0.25)]
    pub rho0: f64,
    #[arg(long = "gibbs-interval", default_value_t = 100)]
    pub gibbs_interval: usize,
    #[arg(long = "batch-size", default_value_t = 100)]
    pub batch_size: usize,
    /// Use only the delayed-rejection exchange after burn-in.
    #[arg(long = "no-all-exchange")]
    pub no_all_exchange: bool,
    /// Crossover selection temperature; defaults to the hottest ladder temperature.
    #[arg(long = "selection-temperature")]
    pub selection_temperature: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Write a checkpoint every this many sweeps (0 disables).
    #[arg(long = "checkpoint-every", default_value_t = 1000)]
    pub checkpoint_every: usize,
    /// Continue from a checkpoint file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightingArg::PerSweep)]
    pub weighting: WeightingArg,
    #[arg(long = "top-k", default_value_t = 1000)]
    pub top_k: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SimgenArgs {
    #[arg(long, value_parser = parse_example)]
    pub example: Example,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Custom example: rows.
    #[arg(long)]
    pub n: Option<usize>,
    /// Custom example: columns.
    #[arg(long)]
    pub p: Option<usize>,
    /// Custom example: 1-based true covariates.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Custom example: coefficients matching --gamma.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long = "noise-sd", default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Custom example design: x1 or ld (autoregressive blocks).
    #[arg(long, default_value = "x1")]
    pub design: String,
    #[arg(long, default_value_t = 20)]
    pub block: usize,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SummarizeArgs {
    /// Directory of a previous `run` (reads output.json).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightingArg::PerSweep)]
    pub weighting: WeightingArg,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_example(s: &str) -> std::result::Result<Example, String> {
    Example::parse(s).map_err(|e| e.to_string())
}

/// Parse `fixed:FLOAT`, `zs`, `hyperg:FLOAT`.
pub fn parse_tau(s: &str, n: usize) -> Result<TauMode> {
    let mode = match s.split_once(':') {
        None if s == "zs" => TauMode::zellner_siow_default(n),
        Some(("fixed", v)) => TauMode::Fixed(parse_f64(v, "--tau fixed")?),
        Some(("hyperg", v)) => TauMode::HyperG { c_tau: parse_f64(v, "--tau hyperg")? },
        _ => return Err(EssError::config(format!("bad --tau {s:?}: expected fixed:FLOAT, zs or hyperg:FLOAT"))),
    };
    mode.validate()?;
    Ok(mode)
}

fn parse_index(t: &str, p: usize) -> Result<usize> {
    match t.trim().parse::<usize>() {
        Ok(j) if (1..=p).contains(&j) => Ok(j - 1),
        _ => Err(EssError::config(format!("--gamma: {t:?} is not an index in 1..={p}"))),
    }
}

fn parse_f64(v: &str, what: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| EssError::config(format!("{what}: cannot parse {v:?} as a number")))
}

pub fn parse_crossovers(s: &str) -> Result<Vec<CrossoverKind>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let k = CrossoverKind::parse(tok)?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(EssError::config("--crossovers needs at least one operator"));
    }
    Ok(out)
}

impl PriorArgs {
    pub fn spec(&self, n: usize, p: usize) -> Result<PriorSpec> {
        let family = match self.prior {
            PriorArg::G => PriorFamily::GPrior,
            PriorArg::Indep => PriorFamily::Independent,
        };
        let omega = match self.e_pgamma {
            Some(e) => {
                let v = self.v_pgamma.unwrap_or(e * (1.0 - e / p as f64));
                elicit_omega_hyperparams(e, v, p)?
            }
            None => OmegaHyper { a: 1.0, b: 1.0, binomial_limit: false },
        };
        let mut spec = PriorSpec::new(family, parse_tau(&self.tau, n)?, omega);
        spec.a_sigma = self.a_sigma;
        spec.b_sigma = self.b_sigma;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
struct DataSource {
    y: Option<PathBuf>,
    x: Option<PathBuf>,
    example: Option<Example>,
    example_seed: Option<u64>,
}

fn load_data(d: &DataArgs, seed: u64) -> Result<(Dataset, DataSource)> {
    match (&d.y, &d.x, d.example) {
        (Some(y), Some(x), None) => Ok((
            Dataset::load_csv(y, x)?,
            DataSource { y: Some(y.clone()), x: Some(x.clone()), example: None, example_seed: None },
        )),
        (None, None, Some(ex)) => {
            if ex == Example::Custom {
                return Err(EssError::config("use `simgen` to build custom examples, then pass --y/--x"));
            }
            let sim = gen_example(&SimSpec::example(ex, seed))?;
            Ok((sim.dataset, DataSource { y: None, x: None, example: Some(ex), example_seed: Some(seed) }))
        }
        _ => Err(EssError::config("provide either --y and --x, or --example")),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> EssError {
    EssError::Io { path: path.to_path_buf(), source: e }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| EssError::config(e.to_string()))?;
    fs::write(path, s).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    command: &'static str,
    replicate: usize,
    data: DataSource,
    n: usize,
    p: usize,
    weighting: String,
    config: &'a RunConfig,
}

fn run_config(a: &RunArgs, spec: PriorSpec, seed: u64) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(spec, a.sweeps, a.burnin, seed);
    cfg.chains = a.chains;
    cfg.b1 = a.b1;
    cfg.local_move = match a.local {
        LocalArg::Fsmh => LocalMove::Fsmh,
        LocalArg::Mc3 => LocalMove::Mc3,
        LocalArg::Gibbs => LocalMove::Gibbs,
    };
    cfg.local_steps = a.local_steps;
    cfg.crossovers = parse_crossovers(&a.crossovers)?;
    cfg.rho0 = a.rho0;
    cfg.gibbs_interval = a.gibbs_interval;
    cfg.batch_size = a.batch_size;
    cfg.all_exchange = !a.no_all_exchange;
    cfg.top_k = a.top_k;
    if let Some(t) = a.selection_temperature {
        cfg.selection_temperature = SelectionTemperature::Fixed(t);
    }
    if a.chains < 3 {
        return Err(EssError::config(format!("--chains must be at least 3 (got {})", a.chains)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(a: &RunArgs, replicate: usize, dir: &Path) -> Result<()> {
    let seed = a.seed.wrapping_add(replicate as u64);
    let (raw, source) = load_data(&a.data, seed)?;
    let spec = a.prior.spec(raw.n(), raw.p())?;
    let cfg = run_config(a, spec, seed)?;
    let ds = prepare_dataset(&raw, cfg.spec.family)?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let weighting: InclusionWeighting = a.weighting.into();
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            artifact: "ess",
            version: VERSION,
            command: "run",
            replicate,
            data: source,
            n: ds.n(),
            p: ds.p(),
            weighting: format!("{weighting:?}"),
            config: &cfg,
        },
    )?;
    let ck_path = dir.join("checkpoint.ckpt");
    let mut sampler = match &a.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.config != cfg {
                return Err(EssError::config("checkpoint configuration differs from the command line"));
            }
            ck.into_sampler(&ds)?
        }
        None => Sampler::new(cfg.clone(), &ds)?,
    };
    while !sampler.is_done() {
        let next = match a.checkpoint_every {
            0 => cfg.sweeps,
            k => (sampler.next_sweep() / k + 1) * k,
        };
        sampler.run_to(next)?;
        if a.checkpoint_every > 0 {
            Checkpoint::capture(&sampler, &ds).save(&ck_path)?;
        }
    }
    let out = sampler.finish();
    write_outputs(&out, dir, weighting)
}

fn write_outputs(out: &SamplerOutput, dir: &Path, weighting: InclusionWeighting) -> Result<()> {
    write_json(&dir.join("output.json"), out)?;
    write_trace_csv(out, &dir.join("trace.csv"))?;
    let summary = PosteriorSummary::from_output(out, weighting)?;
    summary.write(out, dir)?;
    write_json(&dir.join("summary.json"), &summary)
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    if a.replicates == 0 {
        return Err(EssError::config("--replicates must be at least 1"));
    }
    if a.replicates == 1 {
        return run_one(a, 0, &a.out);
    }
    if a.resume.is_some() {
        return Err(EssError::config("--resume applies to a single replicate"));
    }
    (0..a.replicates)
        .into_par_iter()
        .map(|i| run_one(a, i, &a.out.join(format!("rep_{:03}", i + 1))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn cmd_simgen(a: &SimgenArgs) -> Result<()> {
    let mut spec = SimSpec::example(a.example, a.seed);
    if a.example == Example::Custom {
        let (n, p) = match (a.n, a.p) {
            (Some(n), Some(p)) => (n, p),
            _ => return Err(EssError::config("custom examples need --n and --p")),
        };
        let gamma: Vec<usize> = match &a.gamma {
            Some(g) => g.split(',').map(|t| parse_index(t, p)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let beta: Vec<f64> = match &a.beta {
            Some(b) => b.split(',').map(|v| parse_f64(v, "--beta")).collect::<Result<_>>()?,
            None => vec![0.0; gamma.len()],
        };
        let design = match a.design.as_str() {
            "x1" => CustomDesign::X1,
            "ld" => {
                if !(0.0..1.0).contains(&a.rho) {
                    return Err(EssError::config("--rho must lie in [0, 1)"));
                }
                CustomDesign::LdBlocks { block: a.block, rho_milli: (a.rho * 1000.0).round() as u32 }
            }
            d => return Err(EssError::config(format!("unknown --design {d:?} (x1 or ld)"))),
        };
        spec.custom = Some(CustomSpec { n, p, design, gamma_true: gamma, beta_true: beta, noise_sd: a.noise_sd });
    }
    let sim = gen_example(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    sim.dataset.write_design_csv(&a.out.join("x.csv"))?;
    sim.dataset.write_response_csv(&a.out.join("y.csv"))?;
    #[derive(Serialize)]
    struct Truth {
        example: Example,
        seed: u64,
        n: usize,
        p: usize,
        gamma_true: String,
        beta_true: Vec<f64>,
        noise_sd: f64,
        tries: usize,
    }
    write_json(
        &a.out.join("truth.json"),
        &Truth {
            example: a.example,
            seed: a.seed,
            n: sim.dataset.n(),
            p: sim.dataset.p(),
            gamma_true: sim.gamma_true.to_one_based_string(),
            beta_true: sim.beta_true,
            noise_sd: sim.noise_sd,
            tries: sim.tries,
        },
    )
}

fn cmd_summarize(a: &SummarizeArgs) -> Result<()> {
    let path = a.input.join("output.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let out: SamplerOutput =
        serde_json::from_str(&text).map_err(|e| EssError::Dimension(format!("{}: {e}", path.display())))?;
    let dir = a.out.clone().unwrap_or_else(|| a.input.clone());
    let summary = PosteriorSummary::from_output(&out, a.weighting.into())?;
    summary.write(&out, &dir)?;
    write_json(&dir.join("summary.json"), &summary)
}

fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let (raw, _) = load_data(&a.data, a.seed)?;
    let spec = a.prior.spec(raw.n(), raw.p())?;
    let ds = prepare_dataset(&raw, spec.family)?;
    let ex = enumerate_posterior(&ds, &spec)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let f = crate::data::fmt_f64;
    write_rows(
        &a.out.join("inclusion.csv"),
        &["index", "probability"],
        ex.inclusion.iter().enumerate().map(|(j, v)| vec![(j + 1).to_string(), f(*v)]),
    )?;
    write_rows(
        &a.out.join("model_size.csv"),
        &["size", "probability"],
        ex.model_size_pmf.iter().enumerate().map(|(k, v)| vec![k.to_string(), f(*v)]),
    )?;
    write_rows(
        &a.out.join("posterior.csv"),
        &["rank", "probability", "indices"],
        ex.ranked().into_iter().enumerate().map(|(i, (g, pr))| vec![(i + 1).to_string(), f(pr), g.to_one_based_string()]),
    )
}

pub fn exit_code(e: &EssError) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data | ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Simgen(a) => cmd_simgen(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

/// Parse, execute, and map the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("ess").chain(args.iter().copied()))
    }

    #[test]
    fn simulation_protocol_flags_resolve() {
        let cli = parse(&[
            "run", "--example", "Ex1", "--prior", "indep", "--tau", "fixed:1", "--chains", "5", "--sweeps", "22000",
            "--burnin", "2000", "--e-pgamma", "5", "--seed", "1", "--out", "o",
        ])
        .unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let spec = a.prior.spec(120, 60).unwrap();
        assert_eq!(spec.family, PriorFamily::Independent);
        assert_eq!(spec.tau_mode, TauMode::Fixed(1.0));
        let cfg = run_config(&a, spec, 1).unwrap();
        assert_eq!((cfg.sweeps, cfg.burn_in, cfg.chains), (22000, 2000, 5));
        assert_eq!(cfg.crossovers.len(), 4);
    }

    #[test]
    fn invalid_flags_rejected() {
        assert!(parse(&["run", "--example", "Ex1", "--sweeps", "10", "--burnin", "5", "--out", "o", "--bogus"]).is_err());
        assert!(parse(&["run", "--example", "Ex1", "--out", "o"]).is_err());
        let cli = parse(&["run", "--example", "Ex1", "--chains", "2", "--sweeps", "300", "--burnin", "100", "--out", "o"]).unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let e = run_config(&a, a.prior.spec(120, 60).unwrap(), 1).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(parse_tau("fixed:-1", 50).is_err());
        assert!(parse_tau("hyperg:-1", 50).is_err());
        assert!(parse_tau("hyperg:3", 50).is_ok());
        assert!(matches!(parse_tau("zs", 50).unwrap(), TauMode::ZellnerSiow { .. }));
        assert!(parse_crossovers("1pt,nope").is_err());
        assert_eq!(parse_crossovers("block,block,1pt").unwrap().len(), 2);
    }
}
