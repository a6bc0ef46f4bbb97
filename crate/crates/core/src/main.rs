fn main() {
    std::process::exit(pinch_uplink::cli::run(std::env::args_os()));
}
