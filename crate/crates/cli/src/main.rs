fn main() -> std::process::ExitCode {
    storyground_cli::main_with_args(std::env::args_os())
}
