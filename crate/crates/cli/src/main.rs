use clap::Parser;
use jacshape_cli::{run, Args, RunConfig};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cfg = match RunConfig::from_args(Args::parse()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("jacshape: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("jacshape: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
