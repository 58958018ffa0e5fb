fn main() {
    std::process::exit(ess_core::cli::main_with_args(std::env::args_os()));
}
