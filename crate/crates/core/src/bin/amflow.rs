fn main() {
    std::process::exit(amflow::cli::main_with_args(std::env::args_os()));
}
