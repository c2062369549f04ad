fn main() {
    std::process::exit(voxvid_cli::run(std::env::args_os()));
}
