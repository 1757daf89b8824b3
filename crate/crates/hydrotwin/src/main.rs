use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hydrotwin::cli::run_from_env())
}
