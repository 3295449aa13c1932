fn main() {
    std::process::exit(nsmc::cli::run(std::env::args_os()));
}
