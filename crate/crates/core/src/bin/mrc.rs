fn main() {
    std::process::exit(mrc::cli::main_with_args(std::env::args_os()));
}
