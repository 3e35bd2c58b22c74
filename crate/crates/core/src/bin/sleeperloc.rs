fn main() {
    std::process::exit(sleeperloc::cli::cli_main());
}
