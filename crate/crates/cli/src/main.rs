use std::path::PathBuf;
use std::process::ExitCode;

use catbond_cli::{check, execute, thread_cap, with_threads, write_output, CliError, Command, ScenarioConfig, THREADS_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "catbond", version, about = "Zero-coupon catastrophe bond pricing")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// key=value config file
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` from the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price one simulated loss path on the daily grid
    PricePath(Common),
    /// Same path priced under each threshold in `sweep.thresholds`
    ThresholdSweep(Common),
    /// Closed-form price over maturities and thresholds
    Surface(Common),
    /// Closed forms against independent Monte Carlo and quadrature
    Validate(Common),
    /// Batch of seeded scenarios with compound-Poisson comparison
    Scenarios {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 6)]
        n: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, common) = match cli.command {
        Cmd::PricePath(c) => (Command::PricePath, c),
        Cmd::ThresholdSweep(c) => (Command::ThresholdSweep, c),
        Cmd::Surface(c) => (Command::Surface, c),
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Scenarios { common, n } => (Command::Scenarios { n }, common),
    };
    let threads = thread_cap(std::env::var(THREADS_ENV).ok().as_deref())?;
    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", common.config.display()))
    })?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    print!("{}", cfg.to_text());
    let output = with_threads(threads, || execute(command, &cfg))??;
    write_output(&cfg.output_dir, &cfg, &output)?;
    print!("{}", output.summary);
    check(&output)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catbond: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
