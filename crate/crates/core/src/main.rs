fn main() {
    std::process::exit(snls_core::cli::run(std::env::args_os()));
}
