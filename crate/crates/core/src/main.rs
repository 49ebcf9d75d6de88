fn main() {
    std::process::exit(maxmin_lab::cli::run(std::env::args_os()));
}
