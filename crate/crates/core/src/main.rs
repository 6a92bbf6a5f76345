fn main() {
    std::process::exit(qforest::cli::run());
}
