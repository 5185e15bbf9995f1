fn main() {
    std::process::exit(graspsynth::cli::run_command(std::env::args_os()));
}
