//! `pixcode` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid input, 3 runtime failure, 4 guard rail
//! (arity or block size beyond what exhaustive enumeration allows).

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use pixcode::Error;

use args::{Cli, Command};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_GUARD_RAIL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ArityTooLarge { .. } | Error::BlockTooLarge { .. } => EXIT_GUARD_RAIL,
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::InvariantViolation(_)
        | Error::ElementOutOfRange { .. }
        | Error::Domain(_)
        | Error::Json(_) => EXIT_VALIDATION,
        Error::SingularNetwork(_)
        | Error::ZeroPattern { .. }
        | Error::Divergence { .. }
        | Error::File { .. }
        | Error::Io(_) => EXIT_RUNTIME,
    }
}

fn run(cli: &Cli) -> pixcode::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::File { path: cli.out_dir.clone(), source: e })?;
    let out = &manifest::Context { out_dir: cli.out_dir.clone(), jobs: cli.jobs };
    match &cli.command {
        Command::GenAntenna(a) => commands::gen_antenna(out, a),
        Command::GenChannel(a) => commands::gen_channel(out, a),
        Command::GenDataset(a) => commands::gen_dataset(out, a),
        Command::Train(a) => commands::train(out, a),
        Command::Optimize(a) => commands::optimize(out, a),
        Command::Eval(a) => commands::eval(out, a),
        Command::Bench(a) => commands::bench(out, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pixcode {}: error: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
