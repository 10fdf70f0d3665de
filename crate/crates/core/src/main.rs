fn main() {
    std::process::exit(ahlab::cli::run(std::env::args()));
}
