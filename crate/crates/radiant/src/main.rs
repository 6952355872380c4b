use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(radiant_sweep::cli::main_with_args(std::env::args_os()) as u8)
}
