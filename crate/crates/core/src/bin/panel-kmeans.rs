fn main() {
    std::process::exit(panel_kmeans::cli::dispatch(std::env::args_os()));
}
