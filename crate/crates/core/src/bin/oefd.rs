fn main() {
    std::process::exit(oefd_core::cli::run(std::env::args_os()));
}
