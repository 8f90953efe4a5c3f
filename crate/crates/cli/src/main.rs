fn main() {
    std::process::exit(qfcn::run_command(std::env::args_os()));
}
