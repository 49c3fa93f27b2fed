fn main() {
    std::process::exit(bmrmm::cli::run(std::env::args_os()));
}
