fn main() {
    std::process::exit(incongruity_cli::main_with_env());
}
