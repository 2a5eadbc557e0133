fn main() {
    std::process::exit(clientprint_cli::run(std::env::args_os()));
}
