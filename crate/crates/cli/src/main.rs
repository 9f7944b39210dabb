use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfcache_core::experiments::{cmd_compare, cmd_ipi, cmd_solve, validate_report, Report};
use mfcache_core::scenario::{load_scenario, ScenarioConfig};
use mfcache_core::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "mfcache", version, about = "Mean-field edge caching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    replications: Option<usize>,

    #[arg(long = "grid-nx", global = true)]
    grid_nx: Option<usize>,

    #[arg(long = "grid-nq", global = true)]
    grid_nq: Option<usize>,

    #[arg(long = "grid-nt", global = true)]
    grid_nt: Option<usize>,

    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the mean-field equilibrium and write solver tables.
    Solve,
    /// Compare the mean-field, baseline and random policies.
    Compare,
    /// Measure the cost increment caused by imperfect popularity information.
    Ipi,
    /// Check a scenario and print derived quantities.
    Validate,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation { .. } | Error::Parse(_) | Error::Domain(_) | Error::Cfl(_) => EXIT_VALIDATION,
        Error::NotConverged { .. } | Error::Solver(_) | Error::Integrity(_) => EXIT_NOT_CONVERGED,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &cli.scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(r) = cli.replications {
        cfg.simulation.replications = r;
    }
    if let Some(n) = cli.grid_nx {
        cfg.solver.nx = n;
    }
    if let Some(n) = cli.grid_nq {
        cfg.solver.nq = n;
    }
    if let Some(n) = cli.grid_nt {
        cfg.solver.nt = n;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let cfg = load(cli)?;
    let out = PathBuf::from(&cfg.output.directory);
    match cli.command {
        Command::Solve => cmd_solve(&cfg, &out),
        Command::Compare => cmd_compare(&cfg, &out),
        Command::Ipi => cmd_ipi(&cfg, &out),
        Command::Validate => validate_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(report) => {
            if !cli.quiet {
                for line in &report.lines {
                    println!("{line}");
                }
            }
            if report.converged {
                ExitCode::SUCCESS
            } else {
                log::error!("equilibrium did not converge; outputs were still written");
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(err) => {
            log::error!("{err}");
            eprintln!("mfcache: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
