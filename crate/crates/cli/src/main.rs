//! `wavelab` command-line runner. Exit codes: 0 success, 1 run failure,
//! 2 bad configuration, 3 a verified property does not hold.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{Failure, Outcome, Sink};
use config::{hash, load, Validate};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Radial wave equation with a Hartree nonlinearity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of randomized commands; ignored by deterministic ones.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the canonical config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one initial-value problem.
    Solve(Common),
    /// Lifespan over a decreasing list of amplitudes, with log-lifespan fits.
    LifespanSweep(Common),
    /// Run the estimate and blow-up verifiers.
    Verify(Common),
    /// Long runs with critically decaying data for 2 < gamma < 3.
    GlobalPersistence(Common),
    /// Blow-up iteration constants.
    BlowupSeq(Common),
    /// Quadrature against Monte Carlo for the Hartree potential.
    ConvOracle(Common),
}

trait Seeded {
    fn set_seed(&mut self, _seed: u64) {}
}

impl Seeded for config::SolveConfig {}
impl Seeded for config::SweepConfig {}
impl Seeded for config::PersistenceConfig {}
impl Seeded for config::LadderConfig {}

impl Seeded for config::VerifyConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
}

impl Seeded for config::OracleConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
}

fn run<T>(c: &Common, body: fn(&T, &Sink) -> Outcome) -> Outcome
where
    T: DeserializeOwned + Serialize + Validate + Seeded,
{
    let mut cfg: T = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    if c.print_config {
        print!("{}", config::canonical(&cfg));
        return Ok(());
    }
    let sink = Sink::new(&c.out, hash(&cfg))?;
    body(&cfg, &sink)
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("WAVELAB_THREADS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Config(format!("WAVELAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Run(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads().and_then(|()| match &cli.command {
        Command::Solve(c) => run(c, commands::solve_cmd),
        Command::LifespanSweep(c) => run(c, commands::sweep_cmd),
        Command::Verify(c) => run(c, commands::verify_cmd),
        Command::GlobalPersistence(c) => run(c, commands::persistence_cmd),
        Command::BlowupSeq(c) => run(c, commands::ladder_cmd),
        Command::ConvOracle(c) => run(c, commands::oracle_cmd),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
