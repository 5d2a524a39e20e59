fn main() {
    std::process::exit(ioexai::cli::main_with(std::env::args_os()));
}
