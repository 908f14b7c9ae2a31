fn main() {
    std::process::exit(noma_pep_cli::run(std::env::args_os()));
}
