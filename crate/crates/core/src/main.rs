fn main() {
    std::process::exit(triplet_mur::cli::run(std::env::args_os()));
}
