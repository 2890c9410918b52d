fn main() {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let code = tqe_sample::cli::main_with_args(std::env::args_os(), &mut stdout, &mut stderr);
    std::process::exit(code);
}
