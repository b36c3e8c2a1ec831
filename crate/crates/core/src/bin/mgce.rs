fn main() {
    std::process::exit(mgce::cli::run(std::env::args_os()));
}
