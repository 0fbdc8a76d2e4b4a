fn main() {
    std::process::exit(seamtrack::cli::main_with_args(std::env::args_os()));
}
