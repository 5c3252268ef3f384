fn main() {
    std::process::exit(qforecast::cli::run(std::env::args_os()));
}
