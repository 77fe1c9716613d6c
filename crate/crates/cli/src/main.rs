use clap::Parser;

use sumforge::commands::{dispatch, Cli};

fn main() {
    // clap exits with status 2 on unknown flags or subcommands.
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
