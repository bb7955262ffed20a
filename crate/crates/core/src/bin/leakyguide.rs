fn main() {
    std::process::exit(leakyguide::cli::main_with_args(std::env::args_os()));
}
