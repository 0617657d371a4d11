fn main() {
    std::process::exit(hyperclaw::apps::cli::cli_main(std::env::args_os()));
}
