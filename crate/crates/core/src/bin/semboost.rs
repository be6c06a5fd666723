fn main() {
    std::process::exit(semboost::cli::dispatch(std::env::args_os()));
}
