fn main() {
    std::process::exit(timberlease::cli::run());
}
