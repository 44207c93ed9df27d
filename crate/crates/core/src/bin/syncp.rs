fn main() {
    syncp::cli::init_logging();
    let code = syncp::cli::main_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
