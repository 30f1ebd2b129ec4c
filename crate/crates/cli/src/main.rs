use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use heavy_atom_cli::{run, Cli, RunConfig, CACHE_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cache_env = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let result = RunConfig::resolve(cli.command.into(), cli.options, cache_env)
        .and_then(|config| run(&config));
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
