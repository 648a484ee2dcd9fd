fn main() {
    std::process::exit(bvcontrol::cli::run(std::env::args_os()));
}
