fn main() {
    std::process::exit(dynsurr::cli::run_cli(std::env::args_os()));
}
