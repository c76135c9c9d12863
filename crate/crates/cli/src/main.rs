fn main() {
    std::process::exit(scarbench_cli::run(std::env::args_os()));
}
