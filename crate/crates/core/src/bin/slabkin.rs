fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(slabkin::cli::main())
}
