use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use agepop::commands::{cmd_lq, cmd_nullcontrol, cmd_simulate, cmd_sweep, CommandOutcome};
use agepop::config::ScenarioConfig;

/// Age-structured population dynamics with birth control: transport
/// simulation, explicit null controls, LQ optima and turnpike diagnostics.
#[derive(Parser)]
#[command(name = "agepop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free evolution of the configured initial population.
    Simulate(RunArgs),
    /// Synthesize a null control and verify it on the march.
    Nullcontrol(RunArgs),
    /// Dynamic vs static LQ optima with turnpike diagnostics.
    Lq(RunArgs),
    /// Repeat a study over one swept variable.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (flat `section.key = value` lines); defaults apply
    /// when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized profiles.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of retained spectral modes (overrides the scenario).
    #[arg(long)]
    modes: Option<usize>,
    /// Time horizon (overrides the scenario).
    #[arg(long)]
    horizon: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> agepop::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(modes) = self.modes {
            cfg.modes = modes;
        }
        if let Some(horizon) = self.horizon {
            cfg.horizon = horizon;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> agepop::Result<CommandOutcome> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args.resolve()?),
        Command::Nullcontrol(args) => cmd_nullcontrol(&args.resolve()?),
        Command::Lq(args) => cmd_lq(&args.resolve()?),
        Command::Sweep(args) => cmd_sweep(&args.resolve()?),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
