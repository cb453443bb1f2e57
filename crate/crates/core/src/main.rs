use clap::Parser;

use msgod::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("msgod: {e}");
        std::process::exit(1);
    }
}
