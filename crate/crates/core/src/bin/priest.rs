fn main() {
    std::process::exit(priest::cli::main());
}
