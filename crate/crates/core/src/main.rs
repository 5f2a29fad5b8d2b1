fn main() {
    std::process::exit(densitybench::cli::run(std::env::args_os()));
}
