fn main() {
    std::process::exit(algtrend::cli::main_with_args(std::env::args_os()));
}
