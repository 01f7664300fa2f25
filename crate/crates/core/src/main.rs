fn main() {
    std::process::exit(hilbq::cli::main_with(std::env::args_os()));
}
