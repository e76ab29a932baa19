use clap::Parser;
use elens_cli::args::{Cli, Command};
use elens_cli::commands;

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(args) => commands::cmd_sample(args),
        Command::Repulsion(args) => commands::cmd_repulsion(args),
        Command::SizeDist(args) => commands::cmd_size_dist(args),
        Command::Forest(args) => commands::cmd_forest(args),
        Command::Verify(args) => commands::cmd_verify(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
