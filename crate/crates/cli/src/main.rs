fn main() {
    std::process::exit(gaflab_cli::run(std::env::args_os()));
}
