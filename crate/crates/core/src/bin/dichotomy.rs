fn main() {
    std::process::exit(dichotomy::cli::run(std::env::args_os()));
}
