fn main() {
    std::process::exit(markerpass::cli::main_with(std::env::args_os()));
}
