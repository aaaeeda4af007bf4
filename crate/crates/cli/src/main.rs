fn main() {
    std::process::exit(mrlayout_cli::main_with(std::env::args_os()));
}
