mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neuroage_core::units::parse_value;
use neuroage_core::{AnalysisError, SolverError};

use config::{CircuitSel, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "neuroage", version, about = "Spiking neuron aging and mismatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, value_enum)]
    circuit: Option<CircuitSel>,
    /// Flat `section.key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "NEUROAGE_JOBS")]
    jobs: Option<usize>,
    /// Injected current, engineering notation (`1u`, `2.5e-6`).
    #[arg(long, value_parser = eng)]
    i_inj: Option<f64>,
    #[arg(long, value_parser = eng)]
    years: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One transient from rest: waveform CSV and spike summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = eng)]
        t_stop: Option<f64>,
    },
    /// Stress extraction, threshold shifts and fresh/aged comparison.
    Age {
        #[command(flatten)]
        common: Common,
    },
    /// Fresh/aged deviation over an injected-current sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        spacing: Option<String>,
        #[arg(long, value_parser = eng)]
        i_min: Option<f64>,
        #[arg(long, value_parser = eng)]
        i_max: Option<f64>,
    },
    /// Monte Carlo over threshold mismatch.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_parser = eng)]
        a_vt: Option<f64>,
    },
}

fn eng(s: &str) -> Result<f64, String> {
    parse_value(s).ok_or_else(|| format!("not a number: '{s}'"))
}

fn load(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.config {
        cfg.apply_file(p)?;
    }
    if let Some(c) = common.circuit {
        cfg.circuit = c;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.mismatch.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(i) = common.i_inj {
        cfg.set_i_inj(i);
    }
    if let Some(y) = common.years {
        cfg.set_years(y);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, cmd) = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Age { common }
        | Command::Sweep { common, .. }
        | Command::Mc { common, .. } => (common, &cli.command),
    };
    let mut cfg = load(common)?;
    match cmd {
        Command::Simulate { t_stop, .. } => {
            if let Some(t) = t_stop {
                cfg.transient.t_stop = *t;
            }
        }
        Command::Sweep {
            points,
            spacing,
            i_min,
            i_max,
            ..
        } => {
            if let Some(p) = points {
                cfg.sweep.n_points = *p;
            }
            if let Some(s) = spacing {
                cfg.set("sweep.spacing", s)?;
            }
            if let Some(i) = i_min {
                cfg.sweep.i_min = *i;
            }
            if let Some(i) = i_max {
                cfg.sweep.i_max = *i;
            }
        }
        Command::Mc { runs, a_vt, .. } => {
            if let Some(r) = runs {
                cfg.mc_runs = *r;
            }
            if let Some(a) = a_vt {
                cfg.mismatch.a_vt = *a;
            }
        }
        Command::Age { .. } => {}
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    pool.install(|| match cmd {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Age { .. } => commands::age(&cfg),
        Command::Sweep { .. } => commands::sweep(&cfg),
        Command::Mc { .. } => commands::mc(&cfg),
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<SolverError>() {
            return 3;
        }
        if let Some(a) = cause.downcast_ref::<AnalysisError>() {
            return match a {
                AnalysisError::Solver(_) => 3,
                AnalysisError::InvalidParameter(_) | AnalysisError::Netlist(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
