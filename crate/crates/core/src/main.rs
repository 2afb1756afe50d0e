fn main() {
    std::process::exit(causal_choice::cli::run(std::env::args_os()));
}
