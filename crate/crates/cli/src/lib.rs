//! Front end for `catbond-core`: config parsing, commands and output.

pub mod commands;
pub mod config;
pub mod svg;

use std::fs;
use std::path::Path;

use catbond_core::par::Execution;

pub use commands::Output;
pub use config::ScenarioConfig;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CATBOND_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] catbond_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PricePath,
    ThresholdSweep,
    Surface,
    Validate,
    Scenarios { n: usize },
}

pub fn execute(command: Command, cfg: &ScenarioConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    match command {
        Command::PricePath => commands::price_path(cfg),
        Command::ThresholdSweep => commands::threshold_sweep(cfg),
        Command::Surface => commands::surface(cfg),
        Command::Validate => commands::validate(cfg, Execution::Parallel),
        Command::Scenarios { n } => commands::scenarios(cfg, n),
    }
}

/// Writes `output` under `dir` together with the resolved config.
pub fn write_output(dir: &Path, cfg: &ScenarioConfig, output: &Output) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved"), cfg.to_text())?;
    for (name, contents) in &output.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    Ok(())
}

/// Fails with [`CliError::Validation`] when any asserted property broke.
pub fn check(output: &Output) -> Result<(), CliError> {
    match output.failures.as_slice() {
        [] => Ok(()),
        fs => Err(CliError::Validation(fs.join("; "))),
    }
}

/// Reads [`THREADS_ENV`]; `None` when unset.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    let Some(v) = value else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))),
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
