use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use counterport_cli::{run, Cli};

fn main() -> ExitCode {
    // Clap exits with 2 on bad arguments and 0 for --help.
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = run(cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
