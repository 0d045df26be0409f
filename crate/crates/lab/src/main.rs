fn main() {
    std::process::exit(sgflab::cli::main_with_args(std::env::args_os()));
}
