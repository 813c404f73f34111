use clap::Parser;

fn main() {
    std::process::exit(rps_cli::run(rps_cli::Cli::parse()));
}
