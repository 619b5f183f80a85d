use std::process::ExitCode;

use clap::Parser;

use aps_dirac_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for a in &outcome.assertions {
                let status = if a.passed { "pass" } else { "FAIL" };
                eprintln!("{status} {} = {:e} (limit {:e})", a.name, a.value, a.limit);
            }
            eprintln!("wrote {}", outcome.out_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
