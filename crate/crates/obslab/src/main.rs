fn main() {
    std::process::exit(obslab::cli::main_entry());
}
