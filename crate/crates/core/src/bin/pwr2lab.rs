fn main() {
    std::process::exit(pwr2lab::cli::run(std::env::args_os()));
}
