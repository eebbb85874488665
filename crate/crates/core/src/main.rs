fn main() {
    std::process::exit(gbl::harness::cli_main(std::env::args_os()));
}
