fn main() {
    std::process::exit(spanfact::run(std::env::args_os()));
}
