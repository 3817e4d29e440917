fn main() {
    std::process::exit(xnt_cli::run_cli(std::env::args_os().collect()));
}
