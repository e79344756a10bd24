use clap::Parser;

fn main() {
    let args = conformal_cli::Args::parse();
    std::process::exit(conformal_cli::run(&args));
}
