fn main() {
    std::process::exit(catebench::cli::run(std::env::args_os()));
}
