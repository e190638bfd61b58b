fn main() {
    std::process::exit(urtu::cli::run(std::env::args_os()));
}
