fn main() {
    std::process::exit(osc::cli::main_with(std::env::args_os()));
}
