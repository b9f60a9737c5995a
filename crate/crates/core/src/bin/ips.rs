fn main() {
    std::process::exit(ips::cli::main_with_args(std::env::args_os()));
}
