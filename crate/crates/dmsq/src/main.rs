fn main() {
    std::process::exit(dmsq::cli::main_with_args(std::env::args_os()));
}
