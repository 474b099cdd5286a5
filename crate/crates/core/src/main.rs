fn main() {
    std::process::exit(qgen::cli::run_from_env());
}
