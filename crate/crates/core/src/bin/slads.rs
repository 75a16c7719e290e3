fn main() {
    std::process::exit(slads::cli::main_with_args(std::env::args_os()));
}
