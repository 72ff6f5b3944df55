fn main() {
    std::process::exit(mescode_cli::run(std::env::args_os()));
}
