use clap::Parser;

fn main() {
    let cli = autolabel_cli::commands::Cli::parse();
    if let Err(e) = autolabel_cli::commands::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
