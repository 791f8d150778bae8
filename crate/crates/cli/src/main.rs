fn main() {
    std::process::exit(capgrowth_cli::run(std::env::args_os()));
}
