use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rabit::cli::main_with(std::env::args_os()))
}
