fn main() {
    std::process::exit(mfd_bench::cli::run(std::env::args_os()));
}
