fn main() {
    std::process::exit(hoopscan::cli::run(std::env::args_os()));
}
