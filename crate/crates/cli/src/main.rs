use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cahn_hilliard::verification::ConvergenceConfig;
use ch_cli::verify::{self, Outcome};
use ch_cli::{run, CliError, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chsim", version, about = "Energy-stable Cahn-Hilliard solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run {
        config: PathBuf,
        /// Override `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence table.
    Converge {
        #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32, 64, 128])]
        m: Vec<usize>,
        /// `dt = dt_factor * h^2`
        #[arg(long, default_value_t = 1.0)]
        dt_factor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one verification study; exits with 4 if an assertion fails.
    Verify {
        target: Target,
        /// Random fields per resolution (inequalities).
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Domain length (truncation, symbols, inequalities).
        #[arg(long, default_value_t = 3.2)]
        length: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Truncation,
    Symbols,
    Inequalities,
    Convergence,
    Ghost,
}

fn emit(outcome: Outcome, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, &outcome.csv).map_err(|e| CliError::io(path, e))?,
        None => print!("{}", outcome.csv),
    }
    for c in &outcome.checks {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    outcome.into_result().map(|_| ())
}

fn converge(m: Vec<usize>, dt_factor: f64, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = ConvergenceConfig {
        m_list: m,
        dt_factor,
        ..ConvergenceConfig::default()
    };
    let (outcome, _) = verify::convergence(&cfg)?;
    emit(outcome, out)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            let summary = run::run(&cfg, Some(&cfg.output.dir))?;
            println!(
                "{} steps to t = {}; max mass drift {:.2e}; max PSD iterations {}",
                summary.steps(),
                summary.final_time,
                summary.max_mass_drift,
                summary.max_iterations
            );
            if let Some((linf, l2)) = summary.manufactured_error {
                println!("error vs exact solution: linf {linf:.6e}, l2 {l2:.6e}");
            }
            Ok(())
        }
        Command::Converge { m, dt_factor, out } => converge(m, dt_factor, out.as_deref()),
        Command::Verify {
            target,
            trials,
            seed,
            length,
            out,
        } => {
            let out = out.as_deref();
            match target {
                Target::Truncation => emit(verify::truncation(length)?, out),
                Target::Symbols => emit(verify::symbols(length)?, out),
                Target::Inequalities => emit(
                    verify::inequalities(length, &verify::INEQUALITY_LEVELS, trials, seed)?,
                    out,
                ),
                Target::Convergence => converge(vec![16, 32, 64, 128], 1.0, out),
                Target::Ghost => emit(verify::ghost(128)?, out),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
