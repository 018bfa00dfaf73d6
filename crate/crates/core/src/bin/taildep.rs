fn main() {
    std::process::exit(taildep::cli::main_with_args(std::env::args_os()));
}
