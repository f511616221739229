fn main() {
    let code = bethe_lab::cli::run(std::env::args_os());
    std::process::exit(code);
}
