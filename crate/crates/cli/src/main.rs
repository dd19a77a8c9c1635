use clap::Parser;
use sbi_forge_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    std::process::exit(run(cli));
}
