fn main() {
    std::process::exit(lipkin::cli::run_from_env());
}
