fn main() {
    std::process::exit(sdi_core::cli::run(std::env::args_os()));
}
