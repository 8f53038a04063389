fn main() {
    std::process::exit(varfrac::cli::main_with_args(std::env::args_os()));
}
