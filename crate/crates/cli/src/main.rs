fn main() {
    std::process::exit(affbench_cli::run(std::env::args_os()));
}
