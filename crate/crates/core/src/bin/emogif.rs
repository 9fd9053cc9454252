fn main() {
    std::process::exit(emogif::cli::run(std::env::args_os()));
}
