use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crbsde::cli::{parse_config, run, Command, RunOptions, ScenarioConfig};
use crbsde::Error;

#[derive(Parser, Debug)]
#[command(name = "crbsde", version, about = "Doubly conditional reflected BSDEs on scenario trees")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve a reflected BSDE and audit the solution.
    Solve(Common),
    /// Value a Dynkin game over the subfiltration.
    Dynkin(Common),
    /// Reflect a path between two barriers.
    Skorokhod(Common),
    /// Optimal two-mode switching.
    Switch(Common),
    /// Compare two linear problems.
    Compare(Common),
    /// Saddle point of the stopping game of a linear problem.
    Saddle(Common),
    /// Penalization convergence over a grid of penalty levels.
    PenalizeSweep(Common),
    /// Write a random scenario config.
    Gen(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random trees, subfiltrations and generated scenarios.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Run brute-force oracles when the instance is small enough.
    #[arg(long)]
    check: bool,
}

fn split(cmd: Cmd) -> (Command, Common) {
    match cmd {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Dynkin(c) => (Command::Dynkin, c),
        Cmd::Skorokhod(c) => (Command::Skorokhod, c),
        Cmd::Switch(c) => (Command::Switch, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Saddle(c) => (Command::Saddle, c),
        Cmd::PenalizeSweep(c) => (Command::PenalizeSweep, c),
        Cmd::Gen(c) => (Command::Gen, c),
    }
}

fn execute(command: Command, args: Common) -> Result<(), Error> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let cfg: ScenarioConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None if command == Command::Gen => parse_config("{}")?,
        None => return Err(Error::Config("--config is required".into())),
    };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let out_dir = args
        .out
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    log::info!("{} with seed {seed}, writing to {}", command.name(), out_dir.display());
    let output = run(command, &cfg, &RunOptions { seed, check: args.check })?;
    for path in output.write(&out_dir)? {
        log::info!("wrote {}", path.display());
    }
    println!("{}", serde_json::to_string_pretty(&output.report.result).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CRBSDE_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, args) = split(cli.command);
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
