fn main() {
    std::process::exit(shapeopt::cli::main_with(std::env::args_os()));
}
