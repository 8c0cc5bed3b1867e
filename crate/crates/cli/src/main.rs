use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mhd_cli::{config, exit_code, run_command, Command, Overrides};

/// Structure-preserving finite element solver for incompressible MHD.
#[derive(Debug, Parser)]
#[command(name = "mhd", version)]
struct Cli {
    /// Command to run (overrides `command` in the config file).
    #[arg(value_enum)]
    command: Option<Command>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("MHD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| format!("MHD_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let flags = Overrides { command: cli.command, ..cli.overrides };
    let cfg = match config::resolve(cli.config.as_deref(), flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run_command(&cfg);
    match &result {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for path in &report.artifacts {
                log::debug!("wrote {}", path.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result))
}
