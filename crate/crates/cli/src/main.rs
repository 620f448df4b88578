fn main() {
    std::process::exit(pgrad_cli::main_with(std::env::args_os()));
}
