fn main() {
    std::process::exit(qdcascade::cli::run_from(std::env::args_os()));
}
