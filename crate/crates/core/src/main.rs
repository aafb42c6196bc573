fn main() {
    std::process::exit(trailpsi::cli::run(std::env::args_os()));
}
