fn main() {
    std::process::exit(factorlab::cli::run());
}
