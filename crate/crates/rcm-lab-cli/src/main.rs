fn main() {
    std::process::exit(rcm_lab_cli::run_main(std::env::args_os()));
}
