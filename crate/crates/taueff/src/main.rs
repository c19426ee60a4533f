use std::process::exit;

fn main() {
    exit(taueff::cli::run());
}
