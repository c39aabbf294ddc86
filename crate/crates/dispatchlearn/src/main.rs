fn main() {
    std::process::exit(dispatchlearn::cli::main_with_args(std::env::args_os()));
}
