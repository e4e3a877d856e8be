fn main() {
    std::process::exit(stratdetect::cli::run(std::env::args_os()));
}
