fn main() -> std::process::ExitCode {
    nlsep::cli::main()
}
