fn main() {
    std::process::exit(jumpmesh::cli::main_with_args(std::env::args_os()));
}
