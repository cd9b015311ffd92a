fn main() {
    std::process::exit(jsrkit::cli::run());
}
