fn main() {
    std::process::exit(mges::pipeline::run(std::env::args_os()));
}
