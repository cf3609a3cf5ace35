//! The `mvtrack` experiment harness: dataset generation, pipeline runs over
//! seed lists, dropout sweeps and raster dumps.

pub mod args;
pub mod commands;
pub mod config;
pub mod dump;
pub mod error;

pub use args::{Cli, Command};
pub use error::CliError;

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => commands::generate(cli, a),
        Command::Run(a) => commands::run(cli, a).map(|_| ()),
        Command::Sweep(a) => commands::sweep(cli, a).map(|_| ()),
        Command::Dump(a) => dump::dump(cli, a),
        Command::Validate(a) => commands::validate(cli, a),
    }
}
