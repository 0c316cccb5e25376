fn main() {
    std::process::exit(topopt_cli::run_cli(std::env::args_os()));
}
