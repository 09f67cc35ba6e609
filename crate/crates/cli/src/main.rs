fn main() {
    std::process::exit(curvature_cli::main_with(std::env::args_os()));
}
