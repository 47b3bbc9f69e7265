use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bl_scales::cli::main_with_args(std::env::args_os()))
}
