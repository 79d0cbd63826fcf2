use std::process::ExitCode;

use clap::Parser;
use wiresoup::cli::{main_with, Args};

fn main() -> ExitCode {
    match main_with(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
