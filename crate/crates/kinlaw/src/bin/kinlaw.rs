fn main() {
    std::process::exit(kinlaw::cli::run(std::env::args_os()));
}
