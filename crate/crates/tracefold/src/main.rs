fn main() {
    std::process::exit(tracefold::cli::main_with_args(std::env::args_os()));
}
