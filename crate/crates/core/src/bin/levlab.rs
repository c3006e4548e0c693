fn main() {
    std::process::exit(levlab::cli::main_with_args(std::env::args_os()));
}
