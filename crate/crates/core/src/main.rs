fn main() {
    std::process::exit(isonfs::cli::run(std::env::args_os()));
}
