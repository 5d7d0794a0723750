fn main() {
    std::process::exit(bigraph_privacy::harness::cli(std::env::args_os()));
}
