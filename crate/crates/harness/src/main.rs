use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(escal_harness::cli::main_with(std::env::args_os()))
}
