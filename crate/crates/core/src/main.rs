use clap::Parser;

fn main() {
    let cli = dualscale::cli::Cli::parse();
    std::process::exit(dualscale::cli::run(cli));
}
