//! Command-line front end: fitting, simulation, replication batches and
//! reports, each a pure function of its configuration, inputs and seed.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use args::{Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult, ExitKind};

/// Resolve the configuration for a parsed command line and run it.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.command.common().config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.overlay(&cli.command.flags());
    let converged = match &cli.command {
        Command::Fit(_) => commands::cmd_fit(&cfg)?,
        Command::Simulate(_) => commands::cmd_simulate(&cfg)?,
        Command::Replicate(_) => commands::cmd_replicate(&cfg)?,
        Command::Report(_) => commands::cmd_report(&cfg)?,
    };
    if cfg.strict() && !converged {
        return Err(CliError::new(
            ExitKind::NotConverged,
            anyhow::anyhow!("chains did not converge (mean PSRF not below the threshold)"),
        ));
    }
    Ok(())
}
