fn main() -> std::process::ExitCode {
    locmix::cli::main()
}
