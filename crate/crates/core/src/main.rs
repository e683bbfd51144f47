mod cli;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let parsed = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli::run(&parsed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let failure = cli::categorize(&err);
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
