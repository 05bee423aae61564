fn main() {
    std::process::exit(pathtrace::cli::run(std::env::args_os()));
}
