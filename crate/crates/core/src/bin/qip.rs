fn main() {
    std::process::exit(qip_control::cli::run(std::env::args_os()));
}
