use std::process::ExitCode;

use clap::Parser;
use phk_lab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("phk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
