fn main() {
    std::process::exit(integrable_harness::app::run(std::env::args().collect()));
}
