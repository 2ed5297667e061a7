use std::process::ExitCode;

use clap::Parser;
use wagner_cli::{run, Cli, EXIT_UNUSABLE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(raw) = std::env::var("WAGNER_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("wagner: could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("wagner: WAGNER_THREADS must be a positive integer, got {raw:?}");
                return ExitCode::from(EXIT_UNUSABLE as u8);
            }
        }
    }
    let (kind, args) = cli.command.split();
    let outcome = run(kind, args);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.report) {
                eprintln!("wagner: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_UNUSABLE as u8);
            }
        }
        None => print!("{}", outcome.report),
    }
    ExitCode::from(outcome.exit_code as u8)
}
