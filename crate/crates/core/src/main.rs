fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(lookahead::cli::run(std::env::args_os()) as u8)
}
