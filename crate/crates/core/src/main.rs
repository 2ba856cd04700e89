use clap::Parser;
use spdechar::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
