fn main() {
    std::process::exit(cframe_cli::main_with_args(std::env::args_os()));
}
