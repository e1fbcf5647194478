//! `cbs`: ground states, truncation, estimates, variances, shot counts,
//! finite-shot simulation and grouping for Pauli-sum Hamiltonians.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use cbs_core::grouping::Relation;
use cbs_core::sampling::{ExperimentConfig, DEFAULT_EPSILON_FREQ};
use cbs_core::variance::{AllocationMode, DEFAULT_W};
use cbs_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

use commands::{Mode, Switch};
use report::{Format, Report};

#[derive(Parser)]
#[command(name = "cbs", version, about = "Computational-basis-sampling measurement analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Observable JSON file
    #[arg(long)]
    hamiltonian: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StateArg {
    /// Binary state file; defaults to the ground state of the Hamiltonian
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenpair of the Hamiltonian
    GroundState {
        #[command(flatten)]
        common: Common,
        /// Also write the ground state in binary form
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Keep the heaviest basis states up to infidelity epsilon
    Truncate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArg,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// Drop basis states with a different number of set bits first
        #[arg(long)]
        particle_number: Option<u32>,
    },
    /// Truncated expectation value from exact interference probabilities
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArg,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "on")]
        normalize: Switch,
    },
    /// Per-stream single-shot variances and allocation for one method
    Variance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArg,
        /// Grouped estimator; the truncated estimator when absent
        #[arg(long)]
        relation: Option<Relation>,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_W)]
        w: f64,
        /// Total shot budget to allocate
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
    },
    /// Shots needed to reach a target standard deviation, every method
    Shots {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArg,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_W)]
        w: f64,
        #[arg(long, default_value_t = 1e-3)]
        target_sd: f64,
    },
    /// Finite-shot emulation of the measurement pipeline
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArg,
        /// Cumulative-frequency threshold for the retained basis states
        #[arg(long, default_value_t = DEFAULT_EPSILON_FREQ)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_W)]
        w: f64,
        #[arg(long, value_enum, default_value = "on")]
        normalize: Switch,
        #[arg(long)]
        particle_number: Option<u32>,
        /// Basis-sampling shots per replica
        #[arg(long, default_value_t = 10_000)]
        lf: u64,
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        /// Repeats of the whole replica set
        #[arg(long, default_value_t = 1)]
        outer: usize,
    },
    /// Sorted-insertion grouping of the Hamiltonian terms
    Group {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "qwc")]
        relation: Relation,
    },
}

fn run(cli: Cli) -> Result<()> {
    let (common, report): (Common, Report) = match cli.command {
        Command::GroundState { common, state_out } => {
            let r = commands::ground_state(&common.hamiltonian, common.seed, state_out.as_ref())?;
            (common, r)
        }
        Command::Truncate {
            common,
            state,
            epsilon,
            particle_number,
        } => {
            let inst = commands::instance(&common.hamiltonian, state.state.as_ref(), common.seed)?;
            let r = commands::truncation(&inst, epsilon, particle_number)?;
            (common, r)
        }
        Command::Estimate {
            common,
            state,
            epsilon,
            normalize,
        } => {
            let inst = commands::instance(&common.hamiltonian, state.state.as_ref(), common.seed)?;
            let r = commands::estimate(&inst, epsilon, normalize.into())?;
            (common, r)
        }
        Command::Variance {
            common,
            state,
            relation,
            mode,
            epsilon,
            w,
            shots,
        } => {
            let inst = commands::instance(&common.hamiltonian, state.state.as_ref(), common.seed)?;
            let r = commands::variance(&inst, relation, mode, epsilon, w, shots)?;
            (common, r)
        }
        Command::Shots {
            common,
            state,
            epsilon,
            w,
            target_sd,
        } => {
            let inst = commands::instance(&common.hamiltonian, state.state.as_ref(), common.seed)?;
            let r = commands::shots(&inst, epsilon, w, target_sd)?;
            (common, r)
        }
        Command::Simulate {
            common,
            state,
            epsilon,
            mode,
            w,
            normalize,
            particle_number,
            lf,
            replicas,
            outer,
        } => {
            let inst = commands::instance(&common.hamiltonian, state.state.as_ref(), common.seed)?;
            let allocation_mode = match mode {
                Mode::Exact => AllocationMode::Exact,
                Mode::Heuristic => AllocationMode::HeuristicW,
                Mode::Haar => return Err(Error::Domain("haar allocation applies to grouped estimators only".into())),
            };
            let cfg = ExperimentConfig {
                l_f: lf,
                epsilon_freq: epsilon,
                replicas_m: replicas,
                outer_m_prime: outer,
                base_seed: common.seed,
                allocation_mode,
                w,
                particle_filter: particle_number,
                normalize: normalize.into(),
            };
            let r = commands::simulate(&inst, &cfg)?;
            (common, r)
        }
        Command::Group { common, relation } => {
            let r = commands::group(&common.hamiltonian, relation)?;
            (common, r)
        }
    };
    let text = report.render(common.format)?;
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
