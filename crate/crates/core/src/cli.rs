//! Command-line front end: `simulate`, `infer`, `converge`, `diagnose` and
//! `synthesize`.
//!
//! Every command resolves its [`RunConfig`] as flags over `--config` over
//! defaults, validates it before doing any work, and writes a
//! `manifest.json` next to its outputs. If a command fails, the files it
//! already wrote are removed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, Manifest, RunConfig, R_MAX_MARGIN};
use crate::convergence::{self, ConvergenceError};
use crate::data::{self, CellLine, DataError, Dataset, LoadOptions, TimeWindow, ValueUnit};
use crate::inference::{self, diagnostics::merge_summaries, Chain, Diagnostics, InferenceError};
use crate::io::{self, IoError};
use crate::measures::WeightExponent;
use crate::solver::{self, SolverError, Trajectory};

/// Mass beyond this fraction of the domain is reported as possible
/// truncation.
const TAIL_FRACTION: f64 = 2.0 / 3.0;
const TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
    #[error(transparent)]
    Output(#[from] IoError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "spheroid", version, about = "Particle simulation and Bayesian calibration of spheroid growth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward run: radius, diameter and particle-state curves.
    Simulate(CommonArgs),
    /// Metropolis-Hastings calibration against a radius time series.
    Infer(CommonArgs),
    /// Grid-convergence table over several particle counts.
    Converge(CommonArgs),
    /// Recompute diagnostics for an existing chain CSV.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// Chain CSV written by `infer`.
        #[arg(long)]
        chain: PathBuf,
    },
    /// Noisy synthetic observations from the forward model.
    Synthesize(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config or JSON run manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// L-5178Y, V-79, B-16 or a custom name (custom lines need a prior in the config).
    #[arg(long = "cell-line")]
    pub cell_line: Option<CellLine>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub unit: Option<ValueUnit>,
    /// Inclusive observation window T0:T1 in days.
    #[arg(long)]
    pub window: Option<TimeWindow>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Domain radius in mm.
    #[arg(long = "r-max")]
    pub r_max: Option<f64>,
    /// Particle counts for `converge`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Final time of a forward run in days.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Independent chains run in parallel (seeds seed, seed+1, ...).
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long = "time-step")]
    pub time_step: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "sigma-k")]
    pub sigma_k: Option<f64>,
    #[arg(long = "sigma-o")]
    pub sigma_o: Option<f64>,
    #[arg(long = "sigma-i")]
    pub sigma_i: Option<f64>,
    /// Read radii off the Laplace-smoothed CDF.
    #[arg(long)]
    pub regularize: bool,
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone().into(); })*
            };
        }
        set!(
            seed => seed,
            out => out,
            cell_line => cell_line,
            data => data,
            unit => unit,
            window => window,
            iterations => iterations,
            burn_in => burn_in,
            particles => n_particles,
            r_max => r_max,
            counts => particle_counts,
            horizon => horizon,
            chains => chains,
            time_step => time_step,
            alpha => alpha,
            sigma_k => sigma_k,
            sigma_o => sigma_o,
            sigma_i => sigma_i,
        );
        if self.regularize {
            cfg.regularize = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Files written by the current command; removed again unless committed.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), IoError>,
    {
        let path = self.dir.join(name);
        let wrap = |source: std::io::Error| CliError::Write {
            path: path.clone(),
            source,
        };
        let file = File::create(&path).map_err(wrap)?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| match e {
            IoError::Io(source) => wrap(source),
            other => CliError::Output(other),
        })?;
        w.flush().map_err(wrap)?;
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
        let mut names = self.names();
        names.push("manifest.json".into());
        let manifest = Manifest::new(command, cfg, names);
        self.write("manifest.json", |w| io::write_json(&manifest, w))?;
        self.committed = true;
        Ok(std::mem::take(&mut self.written))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn warn_if_truncated(traj: &Trajectory, r_max: f64) {
    if let Some(state) = traj.states.last() {
        let tail = state.tail_mass(TAIL_FRACTION * r_max);
        if tail > TAIL_TOLERANCE * state.tv_norm() {
            log::warn!(
                "colony mass {tail:.3e} lies beyond {:.3} mm at t = {}; consider a larger r_max",
                TAIL_FRACTION * r_max,
                traj.times.last().copied().unwrap_or(0.0)
            );
        }
    }
}

fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = cfg.data.as_ref().ok_or_else(|| {
        ConfigError::Field {
            field: "data",
            message: "a dataset path is required".into(),
        }
    })?;
    let opts = LoadOptions {
        unit: cfg.unit,
        window: cfg.window,
        cell_line: cfg.cell_line.clone(),
    };
    data::load_dataset(path, &opts).map_err(|e| match e {
        DataError::Io(source) => CliError::Read {
            path: path.clone(),
            source,
        },
        other => CliError::Data(other),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let theta = cfg.theta()?;
    let dcfg = cfg.discretization();
    let traj = solver::simulate(&theta, &dcfg, &cfg.quantile(), &cfg.output_times())?;
    warn_if_truncated(&traj, dcfg.r_max);
    let mut out = Outputs::new(&cfg.out)?;
    out.write("trajectory.csv", |w| Ok(io::write_trajectory(&traj, w)?))?;
    out.write("diameter.csv", |w| Ok(io::write_diameters(&traj, w)?))?;
    out.write("states.csv", |w| Ok(io::write_states(&traj, w)?))?;
    out.finish("simulate", cfg)
}

pub fn cmd_synthesize(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let theta = cfg.theta()?;
    let times: Vec<f64> = cfg
        .output_times()
        .into_iter()
        .filter(|&t| t > 0.0 && cfg.window.is_none_or(|w| w.contains(t)))
        .collect();
    if times.is_empty() {
        return Err(CliError::Usage("no output times inside the window".into()));
    }
    let ds = data::synthesize(
        &theta,
        &cfg.discretization(),
        &cfg.quantile(),
        &times,
        cfg.seed,
        cfg.cell_line.clone(),
    )?;
    let mut out = Outputs::new(&cfg.out)?;
    out.write("synthetic.csv", |w| Ok(data::write_dataset(&ds, w)?))?;
    out.finish("synthesize", cfg)
}

fn run_chains(cfg: &RunConfig, data: &Dataset) -> Result<Vec<Chain>, CliError> {
    let prior = cfg.prior()?;
    let dcfg = cfg.discretization();
    let qcfg = cfg.quantile();
    let settings = cfg.sampler();
    if cfg.chains == 1 {
        return Ok(vec![inference::run_chain(Some(data), &prior, &dcfg, &qcfg, &settings)?]);
    }
    let results: Vec<Result<Chain, InferenceError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|k| {
                let settings = inference::SamplerSettings {
                    seed: settings.seed.wrapping_add(k as u64),
                    ..settings.clone()
                };
                let (prior, dcfg, qcfg) = (&prior, &dcfg, &qcfg);
                scope.spawn(move || inference::run_chain(Some(data), prior, dcfg, qcfg, &settings))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    Ok(results.into_iter().collect::<Result<_, _>>()?)
}

pub fn cmd_infer(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = load_data(cfg)?;
    let mut cfg = cfg.clone();
    if cfg.r_max.is_none() {
        let largest = data.max_radius().expect("dataset is non-empty");
        cfg.r_max = Some(R_MAX_MARGIN * largest);
        log::info!("r_max set to {} mm", R_MAX_MARGIN * largest);
    }
    let cfg = &cfg;
    let chains = run_chains(cfg, &data)?;
    let dcfg = cfg.discretization();
    let qcfg = cfg.quantile();

    let max_lag = cfg.max_lag.min(cfg.iterations - cfg.burn_in - 1);
    let diags = chains
        .iter()
        .map(|c| inference::diagnostics(c, max_lag))
        .collect::<Result<Vec<Diagnostics>, _>>()?;
    for (k, d) in diags.iter().enumerate() {
        log::info!(
            "chain {k}: acceptance {:.3}, min ESS {:?}",
            d.acceptance_rate,
            d.min_ess()
        );
        if d.low_ess {
            log::warn!("chain {k}: effective sample size is low; treat the intervals with care");
        }
    }

    let pooled = Chain {
        samples: chains.iter().flat_map(|c| c.samples.iter().copied()).collect(),
        ..Default::default()
    };
    let map = inference::map_estimate(&pooled)?;
    if let Ok(traj) = solver::simulate(&map, &dcfg, &qcfg, &data.times()) {
        warn_if_truncated(&traj, dcfg.r_max);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let band =
        inference::posterior_predictive(&pooled, &data.times(), &dcfg, &qcfg, cfg.predictive_draws, &mut rng)?;

    let mut out = Outputs::new(&cfg.out)?;
    if chains.len() == 1 {
        out.write("chain.csv", |w| Ok(io::write_chain(&chains[0], w)?))?;
        out.write("diagnostics.json", |w| io::write_json(&diags[0], w))?;
    } else {
        for (k, (c, d)) in chains.iter().zip(&diags).enumerate() {
            out.write(&format!("chain_{k}.csv"), |w| Ok(io::write_chain(c, w)?))?;
            out.write(&format!("diagnostics_{k}.json"), |w| io::write_json(d, w))?;
        }
        let merged = merge_summaries(&diags).expect("chains are non-empty");
        out.write("diagnostics_summary.json", |w| io::write_json(&merged, w))?;
    }
    out.write("predictive.csv", |w| Ok(io::write_predictive(&band, w)?))?;
    out.write("map.json", |w| io::write_json(&map, w))?;
    out.finish("infer", cfg)
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let theta = cfg.theta()?;
    let times: Vec<f64> = cfg.output_times().into_iter().filter(|&t| t > 0.0).collect();
    if times.is_empty() {
        return Err(CliError::Usage("converge needs a positive horizon".into()));
    }
    let exponent = WeightExponent::try_from(cfg.weight_exponent)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let table = convergence::convergence_study(
        &theta,
        &cfg.discretization(),
        &cfg.quantile(),
        &cfg.particle_counts,
        &times,
        exponent,
    )?;
    for row in &table.rows {
        println!("N = {:>6}  max error = {:.6e}", row.n_particles, row.max_error);
    }
    println!("per-doubling ratios {:?}, fitted order {:.3}", table.ratios, table.order);
    let mut out = Outputs::new(&cfg.out)?;
    out.write("convergence.csv", |w| Ok(io::write_convergence(&table, w)?))?;
    out.write("convergence.json", |w| io::write_json(&table, w))?;
    out.finish("converge", cfg)
}

pub fn cmd_diagnose(cfg: &RunConfig, chain_path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let file = File::open(chain_path).map_err(|source| CliError::Read {
        path: chain_path.to_path_buf(),
        source,
    })?;
    let chain = io::read_chain(file)?;
    if chain.is_empty() {
        return Err(InferenceError::EmptyChain.into());
    }
    let d = inference::diagnostics(&chain, cfg.max_lag.min(chain.len() - 1))?;
    println!("samples {}  acceptance {:.4}", d.n_samples, d.acceptance_rate);
    for (k, name) in d.parameters.iter().enumerate() {
        let q = d.quantiles[k];
        let ess = d.ess[k].map_or("degenerate".to_string(), |e| format!("{e:.1}"));
        println!("{name:>12}  ESS {ess:>10}  95% [{:.4}, {:.4}]  median {:.4}", q[0], q[2], q[1]);
    }
    let mut out = Outputs::new(&cfg.out)?;
    out.write("diagnostics.json", |w| io::write_json(&d, w))?;
    out.finish("diagnose", cfg)
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a.resolve()?),
        Command::Infer(a) => cmd_infer(&a.resolve()?),
        Command::Converge(a) => cmd_converge(&a.resolve()?),
        Command::Diagnose { common, chain } => cmd_diagnose(&common.resolve()?, &chain),
        Command::Synthesize(a) => cmd_synthesize(&a.resolve()?),
    }
}
