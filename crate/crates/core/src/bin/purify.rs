fn main() {
    std::process::exit(purify_core::cli::run(std::env::args_os()));
}
