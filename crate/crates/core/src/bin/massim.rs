fn main() {
    std::process::exit(massim::harness::cli_main(std::env::args_os()));
}
