use clap::Parser;

fn main() {
    let cli = obstop_cli::Cli::parse();
    std::process::exit(obstop_cli::run(cli));
}
