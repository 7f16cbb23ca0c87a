fn main() {
    std::process::exit(nonres::cli::run_from(std::env::args()));
}
