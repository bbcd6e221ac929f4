fn main() {
    std::process::exit(bernstein_orlicz::cli::run(std::env::args_os()));
}
