fn main() {
    std::process::exit(portfolio_cam::cli::run());
}
