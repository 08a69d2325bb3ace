fn main() {
    std::process::exit(bandit_lab::cli::main_with_args(std::env::args_os()));
}
