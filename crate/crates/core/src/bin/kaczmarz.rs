use std::process::ExitCode;

fn main() -> ExitCode {
    kaczmarz::experiments::cli::cli_main(std::env::args_os())
}
