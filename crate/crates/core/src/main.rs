use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hjdecomp::cli::parse_and_dispatch(std::env::args()) as u8)
}
