fn main() {
    std::process::exit(acm::cli::run(std::env::args_os()));
}
