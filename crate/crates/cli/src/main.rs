use clap::Parser;

fn main() {
    let cli = synergy_cli::Cli::parse();
    std::process::exit(synergy_cli::execute(cli));
}
