//! `cmprec`: BER sweeps, iteration trade-off tables, and self tests for
//! finite-phase constant-modulus precoding. Exit codes follow the usual
//! convention: 0 on success, 1 when a well-formed run fails, 2 for usage
//! errors (clap reports its own parse failures with 2 as well).

mod manifest;
mod options;
mod selftest;
mod sweep;
mod tradeoff;

use clap::Parser;

use options::{apply_thread_cap, resolve_sweep, resolve_tradeoff, Cli, CliError, Command};

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(args) => {
            let spec = resolve_sweep(args)?;
            apply_thread_cap(spec.threads)?;
            sweep::run(&spec)
        }
        Command::Tradeoff(args) => {
            let spec = resolve_tradeoff(args)?;
            apply_thread_cap(spec.threads)?;
            tradeoff::run(&spec)
        }
        Command::Selftest(args) => selftest::run(&args),
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
