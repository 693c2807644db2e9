fn main() {
    std::process::exit(ottc_core::cli::run(std::env::args_os()));
}
