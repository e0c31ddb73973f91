fn main() {
    std::process::exit(hdnn_cli::run(std::env::args_os()));
}
