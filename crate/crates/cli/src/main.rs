fn main() {
    std::process::exit(lazo_cli::run_cli(std::env::args_os()));
}
