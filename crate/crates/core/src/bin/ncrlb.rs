fn main() {
    std::process::exit(ncrlb::experiments::cli_main(std::env::args_os()));
}
