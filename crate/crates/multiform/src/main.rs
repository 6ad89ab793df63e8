use std::process::exit;

fn main() {
    exit(multiform::cli::run(std::env::args()));
}
