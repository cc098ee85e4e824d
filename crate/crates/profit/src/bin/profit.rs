fn main() {
    std::process::exit(profit::cli::main_with(std::env::args_os()));
}
