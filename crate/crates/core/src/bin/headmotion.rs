fn main() -> std::process::ExitCode {
    headmotion::cli::main_with_args(std::env::args_os())
}
