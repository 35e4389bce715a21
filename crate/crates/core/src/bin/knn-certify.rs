fn main() {
    std::process::exit(knn_certify::cli::main_with_args(std::env::args_os()));
}
