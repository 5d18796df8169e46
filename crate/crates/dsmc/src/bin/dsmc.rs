fn main() {
    std::process::exit(dsmc::cli::run_cli(std::env::args_os()));
}
