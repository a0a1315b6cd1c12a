fn main() {
    std::process::exit(inn_cli::main_with(std::env::args_os()));
}
