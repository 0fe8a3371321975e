fn main() {
    std::process::exit(mtbl::cli::run(std::env::args_os()));
}
