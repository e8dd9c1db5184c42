fn main() {
    std::process::exit(cutloc::cli::main());
}
