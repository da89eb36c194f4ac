fn main() {
    std::process::exit(srlb_cli::run(std::env::args()));
}
