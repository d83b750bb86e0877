fn main() {
    std::process::exit(sentinfo::cli::run(std::env::args_os()));
}
