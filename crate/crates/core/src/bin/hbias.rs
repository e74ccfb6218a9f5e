fn main() {
    std::process::exit(hbias::cli::run(std::env::args_os()));
}
