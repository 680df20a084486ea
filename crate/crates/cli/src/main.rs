fn main() {
    std::process::exit(l1ksvd_cli::main_with_args(std::env::args_os()));
}
