fn main() {
    std::process::exit(kinetic_limit::harness::cli::run_cli(std::env::args_os()));
}
