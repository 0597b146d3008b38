fn main() {
    std::process::exit(citimpact::cli::dispatch(std::env::args_os()));
}
