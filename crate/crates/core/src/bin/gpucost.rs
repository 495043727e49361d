fn main() -> std::process::ExitCode {
    gpucost::cli::run(std::env::args_os())
}
