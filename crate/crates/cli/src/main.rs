fn main() {
    std::process::exit(billiards_cli::main_with_args(std::env::args_os()));
}
