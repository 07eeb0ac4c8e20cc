use std::process::ExitCode;

fn main() -> ExitCode {
    fesim_cli::main_with_args(std::env::args_os())
}
