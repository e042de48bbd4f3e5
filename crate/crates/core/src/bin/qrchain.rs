fn main() {
    std::process::exit(qrchain::cli::run(std::env::args_os()));
}
