fn main() {
    std::process::exit(nlos_csi::cli::run(std::env::args_os()));
}
