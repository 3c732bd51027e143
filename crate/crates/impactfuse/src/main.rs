fn main() {
    std::process::exit(impactfuse::cli::run(std::env::args_os()));
}
