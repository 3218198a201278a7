fn main() {
    std::process::exit(fe_contours::cli::main_with_args(std::env::args_os()));
}
