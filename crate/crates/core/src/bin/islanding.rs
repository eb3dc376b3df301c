fn main() -> std::process::ExitCode {
    islanding::cli::main()
}
