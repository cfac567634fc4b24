fn main() {
    std::process::exit(maxsharpe::cli::run(std::env::args_os()));
}
