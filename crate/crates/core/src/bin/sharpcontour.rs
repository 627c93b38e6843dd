fn main() {
    std::process::exit(sharpcontour::cli::run(std::env::args_os()));
}
