fn main() {
    std::process::exit(repomech_cli::run_command(std::env::args_os()));
}
