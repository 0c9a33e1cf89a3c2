fn main() {
    std::process::exit(stochgame::cli::run(std::env::args_os()));
}
