fn main() {
    std::process::exit(stdec_cli::main_with(std::env::args_os()));
}
