fn main() {
    std::process::exit(docdiff::cli::run());
}
