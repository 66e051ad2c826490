fn main() {
    std::process::exit(nhse_circuit::cli::run(std::env::args_os()));
}
