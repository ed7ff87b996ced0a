use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lpavg::run(std::env::args_os()))
}
