fn main() -> std::process::ExitCode {
    uispec_service::cli::main()
}
