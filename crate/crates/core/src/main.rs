fn main() {
    std::process::exit(numline::cli::run(std::env::args_os()));
}
