//! Batch CLI for fitting ordered and unordered block models to
//! directed multigraphs.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod args;
mod commands;
mod config;
mod report;

use args::{Cli, Command};
use clap::Parser;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Compare(a) => commands::cmd_compare(a),
        Command::Marginals(a) => commands::cmd_marginals(a),
        Command::Generate(a) => commands::cmd_generate(a),
        Command::Rank(a) => commands::cmd_rank(a),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
