fn main() {
    std::process::exit(hitchin_glue::cli::run_from_args(std::env::args_os()));
}
