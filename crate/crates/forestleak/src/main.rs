fn main() {
    std::process::exit(forestleak::cli::run());
}
