use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("POLCOV_LOG", "info")).init();
    polcov::cli::run(std::env::args_os())
}
