fn main() {
    std::process::exit(rxnkit::cli::main());
}
