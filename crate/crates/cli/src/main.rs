mod cli;
mod commands;
mod config;
mod data;
mod error;
mod simulate;
mod svg;

use clap::Parser;
use log::LevelFilter;

use crate::cli::{Cli, Command};
use crate::config::{Analysis, FileConfig, Simulation};
use crate::error::Result;

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Warn,
        (false, 1) => LevelFilter::Info,
        (false, 2) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --threads is ignored");
    }
    Ok(())
}

fn run(cli: &Cli, file: &FileConfig) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(&Simulation::resolve(a, file)?, &a.out),
        Command::Fit(a) => {
            let cfg = Analysis::resolve(&a.analysis, file)?;
            commands::cmd_fit(&cfg, &a.analysis.dataset, a.all_windows, a.out.as_deref())
        }
        Command::Stats(a) => commands::cmd_stats(&Analysis::resolve(&a.analysis, file)?, &a.analysis.dataset, &a.out),
        Command::Report(a) => {
            let cfg = Analysis::resolve(&a.analysis, file)?;
            commands::cmd_report(&cfg, &a.analysis.dataset, a.all_windows, a.out.as_deref())
        }
        Command::Baselines(a) => commands::cmd_baselines(a.k, a.lambda, a.out.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    init_logging(&cli);
    let result = config::load(cli.config.as_deref()).and_then(|file| {
        init_threads(cli.threads.or(file.threads))?;
        run(&cli, &file)
    });
    if let Err(e) = result {
        log::error!("{e}");
        std::process::exit(e.exit_code());
    }
}
