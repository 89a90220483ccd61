fn main() {
    std::process::exit(countseq::cli::main_with_args(std::env::args_os()));
}
