fn main() {
    std::process::exit(srweyl::cli::main_with_args(std::env::args_os()));
}
