fn main() {
    std::process::exit(qvgc::cli::run(std::env::args_os()));
}
