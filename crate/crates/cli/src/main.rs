fn main() {
    std::process::exit(pgica::run(std::env::args_os()));
}
