fn main() {
    std::process::exit(subsight::cli::run(std::env::args_os()));
}
