fn main() {
    std::process::exit(bipde::cli::run());
}
