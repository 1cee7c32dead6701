fn main() {
    std::process::exit(algctl::run(std::env::args_os()));
}
