fn main() {
    std::process::exit(dbwqs::cli::main_with_args(std::env::args_os()));
}
