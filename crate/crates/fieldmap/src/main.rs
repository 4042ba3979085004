fn main() {
    std::process::exit(fieldmap::cli::main_with(std::env::args_os()));
}
