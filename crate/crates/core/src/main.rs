fn main() -> std::process::ExitCode {
    eal_core::cli::main()
}
