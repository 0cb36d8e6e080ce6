//! Driver for the `grushin` command: each subcommand wraps one numerical
//! experiment from `grushin-core` and writes its data under `--out-dir`.

pub mod commands;
pub mod config;
pub mod error;
pub mod selftest;

use commands::Output;
use config::{Cli, Command, Settings};
use error::{CliError, CliResult};

fn dispatch(command: Command, s: &Settings, file: config::ConfigFile) -> CliResult<Output> {
    match command {
        Command::Geodesic(a) => commands::geodesic(s, a.or(file.geodesic)),
        Command::Loci(a) => commands::loci(s, a.or(file.loci)),
        Command::Corner(a) => commands::corner(s, a.or(file.corner)),
        Command::Series(a) => commands::series(s, a.or(file.series)),
        Command::Heat(a) => commands::heat(s, a.or(file.heat)),
        Command::Selftest(_) => {
            let report = selftest::run(s);
            let mut out = Output::default();
            out.write_json(&s.out_dir, "selftest.json", &report)?;
            out.write(&s.out_dir, "selftest.txt", &report.table())?;
            out.stdout = report.table();
            if report.pass() {
                Ok(out)
            } else {
                print!("{}", out.stdout);
                Err(CliError::Selftest(report.failures()))
            }
        }
    }
}

/// Runs one parsed invocation inside a pool capped at `--threads`.
pub fn run(cli: Cli) -> CliResult<Output> {
    let (settings, file) = config::resolve(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &settings, file))
}
