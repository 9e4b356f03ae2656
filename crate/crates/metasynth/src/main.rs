fn main() {
    std::process::exit(metasynth::cli::run(std::env::args_os()));
}
