fn main() {
    std::process::exit(ihqgan::cli::run(std::env::args_os()));
}
