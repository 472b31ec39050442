fn main() -> std::process::ExitCode {
    clipped_metrics::cli::main()
}
