use clap::Parser;
use grushin_cli::config::Cli;

fn main() {
    match grushin_cli::run(Cli::parse()) {
        Ok(out) => print!("{}", out.stdout),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
