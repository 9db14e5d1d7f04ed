fn main() {
    std::process::exit(qekit_cli::run(std::env::args_os()));
}
