fn main() {
    std::process::exit(polyrlt_cli::app::run(std::env::args_os()));
}
