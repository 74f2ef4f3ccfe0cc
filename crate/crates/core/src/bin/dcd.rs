fn main() {
    std::process::exit(dcd_core::harness::cli::run(std::env::args_os()));
}
