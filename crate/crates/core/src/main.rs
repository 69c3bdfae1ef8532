fn main() {
    std::process::exit(auction_sim::cli::run(std::env::args_os().skip(1)));
}
