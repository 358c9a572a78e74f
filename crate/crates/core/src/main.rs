fn main() {
    std::process::exit(polylda::cli::run(std::env::args_os()));
}
