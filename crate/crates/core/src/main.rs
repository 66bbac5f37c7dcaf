fn main() {
    std::process::exit(minimax_core::cli::main_from_args(std::env::args_os()));
}
