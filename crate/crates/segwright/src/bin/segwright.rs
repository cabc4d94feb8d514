//! Thin entry point: argument parsing and logging live here, everything
//! else is in the library so examples and tests can drive the same code.

use clap::Parser;
use segwright::cli::{run, App};

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("SEGWRIGHT_LOG", "warn"),
    )
    .init();
    let app = App::parse();
    if let Err(err) = run(app) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
