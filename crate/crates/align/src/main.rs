fn main() {
    std::process::exit(salience_align::cli::dispatch(std::env::args_os()));
}
