fn main() {
    std::process::exit(dualkan::cli::main_with_args(std::env::args_os()));
}
