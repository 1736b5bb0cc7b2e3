fn main() {
    std::process::exit(vrdie_cli::main_with(std::env::args_os()));
}
