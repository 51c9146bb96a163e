fn main() {
    std::process::exit(gfperc::app::main_with(std::env::args_os()));
}
