fn main() {
    std::process::exit(hhf_core::cli::run_from_env());
}
