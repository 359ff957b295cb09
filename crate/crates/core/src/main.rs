fn main() {
    std::process::exit(clmeasure::cli::run(std::env::args_os()));
}
