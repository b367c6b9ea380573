use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use superres_cli::{run, Command};

/// Super-resolution experiments: scene generation, recovery, certificates
/// and bound sweeps.
#[derive(Debug, Parser)]
#[command(name = "superres", version)]
struct Args {
    command: Command,
    /// JSON config for the command.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(args.command, &args.config, &args.out, args.seed) {
        Ok(manifest) => {
            println!("{}: wrote {} files to {}", manifest.command, manifest.files.len() + 1, args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
