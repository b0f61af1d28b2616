fn main() {
    std::process::exit(rankshrink::cli_io::main_with_args(std::env::args_os()));
}
