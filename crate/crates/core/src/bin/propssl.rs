fn main() {
    std::process::exit(propssl::cli::main_with_args(std::env::args_os()));
}
