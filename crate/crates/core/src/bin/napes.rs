fn main() {
    std::process::exit(napes::cli::run(std::env::args_os()));
}
