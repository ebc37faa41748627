fn main() {
    std::process::exit(cutofflab::cli::run(std::env::args_os()));
}
