fn main() {
    std::process::exit(clipguard::cli::run(std::env::args_os()));
}
