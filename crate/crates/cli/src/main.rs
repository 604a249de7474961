//! `geomforce`: command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical non-convergence,
//! 3 a hard invariant was refuted. Errors are reported as one JSON object per
//! line on standard error.

mod args;
mod commands;
mod output;
mod units;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use geomforce_core::{Error, ErrorClass};
use serde_json::json;

use args::{Cli, Command};

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 1,
        ErrorClass::Numerical => 2,
    }
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = output::to_json_line(&json!({"error": kind, "message": message, "exit_code": code}));
    let _ = writeln!(std::io::stderr(), "{line}");
    ExitCode::from(code)
}

fn emit(path: Option<&std::path::Path>, body: &str) -> std::io::Result<()> {
    match path {
        Some(p) => output::write_atomic(p, body),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()
        }
    }
}

fn run(cli: Cli) -> Result<(commands::Outcome, Option<std::path::PathBuf>), Error> {
    let out = |o: &args::OutputArgs| o.output.clone();
    Ok(match &cli.command {
        Command::Parse(a) => (commands::parse(a)?, None),
        Command::Fields(a) => (commands::fields(a)?, out(&a.out)),
        Command::Extrema(a) => (commands::extrema(a)?, out(&a.out)),
        Command::Classical(a) => {
            let (outcome, csv) = commands::classical(a)?;
            if let (Some(path), Some(csv)) = (&a.trajectory, csv) {
                output::write_atomic(path, &csv)
                    .map_err(|e| Error::InvalidInput(format!("cannot write `{}`: {e}", path.display())))?;
            }
            (outcome, out(&a.out))
        }
        Command::Verify(a) => (commands::verify(a)?, out(&a.out)),
        Command::Force(a) => (commands::force(a)?, out(&a.out)),
        Command::Ehrenfest(a) => (commands::ehrenfest(a)?, out(&a.out)),
        Command::Report(a) => (commands::report(a)?, out(&a.out)),
    })
}

fn main() -> ExitCode {
    let argv = match args::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report_error(e.kind(), &e.to_string(), 1),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            return report_error("UsageError", first, 1);
        }
    };
    match run(cli) {
        Ok((outcome, path)) => {
            if let Err(e) = emit(path.as_deref(), &outcome.body) {
                return report_error("IoError", &e.to_string(), 1);
            }
            if outcome.code == 3 {
                return report_error("InvariantRefuted", "a hard invariant did not hold; see the report", 3);
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => report_error(e.kind(), &e.to_string(), exit_code(&e)),
    }
}
