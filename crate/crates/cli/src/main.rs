fn main() {
    std::process::exit(uritwin_cli::run(std::env::args_os()));
}
