fn main() {
    std::process::exit(midigram_cli::run());
}
