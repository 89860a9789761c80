fn main() {
    if let Err(error) = loglin::cli::run_from_args() {
        eprintln!("error: {error}");
        std::process::exit(1);
    }
}
