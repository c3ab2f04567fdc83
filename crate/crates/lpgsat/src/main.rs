fn main() {
    std::process::exit(lpgsat::cli::run(std::env::args_os()));
}
