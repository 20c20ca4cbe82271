fn main() {
    std::process::exit(rxiv_cli::cli(std::env::args_os()));
}
