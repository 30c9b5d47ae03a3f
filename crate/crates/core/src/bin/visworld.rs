fn main() -> std::process::ExitCode {
    visworld::cli::main()
}
