fn main() {
    std::process::exit(privml_cli::run(std::env::args_os()));
}
