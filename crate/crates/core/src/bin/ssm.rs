fn main() {
    std::process::exit(species_sampling::cli::run(std::env::args_os()));
}
