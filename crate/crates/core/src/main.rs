use std::process::ExitCode;

fn main() -> ExitCode {
    let code = std::panic::catch_unwind(|| mcm::cli::run(std::env::args_os()))
        .unwrap_or(mcm::cli::EXIT_INTERNAL);
    ExitCode::from(code as u8)
}
