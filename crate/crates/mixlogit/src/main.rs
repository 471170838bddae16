fn main() {
    std::process::exit(mixlogit::cli::dispatch(std::env::args()));
}
