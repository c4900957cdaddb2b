use clap::Parser;

fn main() {
    let cli = spikelab::cli::Cli::parse();
    if let Err(e) = spikelab::cli::run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
