use std::process::ExitCode;

mod runner;

fn main() -> ExitCode {
    ExitCode::from(runner::run(std::env::args().collect()))
}
