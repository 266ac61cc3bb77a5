fn main() {
    std::process::exit(harmonic_lattice::cli::run(std::env::args_os()));
}
