fn main() {
    std::process::exit(sensemble::cli::run(std::env::args_os()));
}
