mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use equifwer::{Error, ErrorKind, Execution};

use args::Cli;
use commands::{run, Globals};

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Domain => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Io => 4,
    }
}

fn report(e: &Error) -> ExitCode {
    let kind = match e.kind() {
        ErrorKind::Domain => "domain",
        ErrorKind::Numeric => "numeric",
        ErrorKind::Io => "io",
    };
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{kind}]: {msg}");
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.tolerance {
        if !(t > 0.0 && t < 1.0) {
            return report(&Error::Domain(format!("--tolerance must lie in (0, 1), got {t}")));
        }
    }
    let globals = Globals {
        output: cli.output,
        tolerance: cli.tolerance,
        seed: cli.seed,
        execution: Execution::from_threads(cli.threads),
    };
    match run(&cli.command, &globals) {
        Ok(r) => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = out.write_all(r.stdout.as_bytes()).and_then(|_| out.flush()) {
                return report(&Error::Io(e));
            }
            match r.deferred {
                Some(e) => report(&e),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => report(&e),
    }
}
