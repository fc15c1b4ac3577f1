//! `sreels`: runs coupling, spectrum, sweep, dynamics and reconstruction
//! experiments from a JSON configuration and writes CSV/JSON artifacts plus
//! a `run.json` manifest.

mod commands;
mod config;
mod error;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, Model, PathwayChoice, RunConfig};
use error::CliError;
use output::Artifacts;

#[derive(Parser)]
#[command(name = "sreels", version, about = "Electron energy-loss spectroscopy of superradiant emitter ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every experiment; flags override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Seed for all random draws (required by stochastic runs)
    #[arg(long)]
    seed: Option<u64>,
    /// Electron speed v/c
    #[arg(long)]
    beta: Option<f64>,
    /// Number of emitters N
    #[arg(long)]
    emitters: Option<usize>,
    /// Uniform coupling magnitude |g|
    #[arg(long)]
    g: Option<f64>,
    /// Transition wavelength in nm
    #[arg(long)]
    lambda0: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Electron-emitter coupling constants of the configured ensemble
    Coupling {
        #[command(flatten)]
        common: Common,
    },
    /// Energy-loss spectrum of a ladder state or a pulse-excited ensemble
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Ladder level |m> to probe instead of the configured state
        #[arg(long)]
        fock: Option<usize>,
    },
    /// Effective coupling over excitation angle and pulse duration
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        pathway: Option<PathwayChoice>,
        /// Angle grid step in degrees
        #[arg(long)]
        theta_step: Option<f64>,
        /// Carrier-jitter samples per grid point (experimental)
        #[arg(long)]
        jitter: Option<usize>,
    },
    /// Superradiant decay and energy-loss spectra along it
    Dynamics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// Single-emitter decay rate in 1/fs
        #[arg(long)]
        gamma: Option<f64>,
        /// Number of TWA trajectories
        #[arg(long)]
        trajectories: Option<usize>,
        /// Last stored time in fs
        #[arg(long)]
        t_max: Option<f64>,
        /// Output time step in fs
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Ladder populations from a measured energy-loss spectrum
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Energy-loss CSV (`loss_index,energy_eV,probability`, optional `delay_fs`)
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        /// Relative noise level for discrepancy-principle regularisation
        #[arg(long)]
        noise: Option<f64>,
        /// Delay to pick from a per-delay spectra file
        #[arg(long)]
        delay: Option<f64>,
    },
    /// Reduced-scale invariant checks
    Selftest,
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(beta) = common.beta {
        cfg.electron.beta = beta;
    }
    if let Some(n) = common.emitters {
        cfg.ensemble.emitters = n;
    }
    if let Some(g) = common.g {
        cfg.ensemble.g = Some(g);
    }
    if let Some(l) = common.lambda0 {
        cfg.ensemble.lambda0 = Some(l);
        cfg.ensemble.hbar_omega0 = None;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (exp, common, cfg) = match cli.command {
        Command::Selftest => {
            let failed = selftest::run();
            return if failed == 0 { Ok(()) } else { Err(CliError::SelfTest(failed)) };
        }
        Command::Coupling { common } => {
            let cfg = base_config(&common)?;
            (Experiment::Coupling, common, cfg)
        }
        Command::Spectrum { common, fock } => {
            let mut cfg = base_config(&common)?;
            if let Some(m) = fock {
                cfg.state = config::StateSpec::Fock { m };
                cfg.pulse = None;
            }
            (Experiment::Spectrum, common, cfg)
        }
        Command::Sweep { common, pathway, theta_step, jitter } => {
            let mut cfg = base_config(&common)?;
            if let Some(p) = pathway {
                cfg.sweep.pathway = p;
            }
            if let Some(s) = theta_step {
                cfg.sweep.theta_step_deg = s;
            }
            if let Some(j) = jitter {
                cfg.sweep.jitter_samples = Some(j);
            }
            (Experiment::Sweep, common, cfg)
        }
        Command::Dynamics { common, model, gamma, trajectories, t_max, dt } => {
            let mut cfg = base_config(&common)?;
            let d = &mut cfg.dynamics;
            if let Some(m) = model {
                d.model = m;
            }
            if let Some(g) = gamma {
                d.gamma = g;
            }
            if let Some(m) = trajectories {
                d.trajectories = m;
            }
            if let Some(t) = t_max {
                d.t_max_fs = t;
            }
            if let Some(t) = dt {
                d.dt_fs = t;
            }
            (Experiment::Dynamics, common, cfg)
        }
        Command::Reconstruct { common, input, lambda_reg, noise, delay } => {
            let mut cfg = base_config(&common)?;
            let r = &mut cfg.reconstruct;
            if input.is_some() {
                r.input = input;
            }
            if let Some(l) = lambda_reg {
                r.lambda_reg = l;
            }
            if noise.is_some() {
                r.noise = noise;
            }
            if delay.is_some() {
                r.delay_fs = delay;
            }
            (Experiment::Reconstruct, common, cfg)
        }
    };
    drop(common);
    cfg.check_experiment(exp)?;
    let seed = cfg.require_seed(exp)?;
    let mut out = Artifacts::create(&cfg.output.dir)?;
    let (outcome, settings) = commands::dispatch(exp, &cfg, seed, &mut out)?;
    let manifest = out.finish(exp.name(), seed, &cfg, settings)?;
    println!("[{}] {}; manifest {}", exp.name(), outcome.summary, manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
