fn main() -> std::process::ExitCode {
    layerpm::cli::main()
}
