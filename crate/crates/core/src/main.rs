fn main() {
    std::process::exit(nilrec::cli::main_with_args(std::env::args_os()));
}
