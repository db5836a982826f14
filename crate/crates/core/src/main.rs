use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mimo_crossing::scenario::{run, write_artifacts, Format, Scenario};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

/// Runs one JSON scenario and writes plot-ready CSV or JSON.
///
/// Exit status: 0 on success, 1 for a configuration error, 2 for a numerical
/// failure, 3 when a checked property is violated.
#[derive(Debug, Parser)]
#[command(name = "mimo-crossing", version)]
struct Cli {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory; artifacts go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let result = Scenario::load(&cli.config).and_then(|(s, canonical)| run(&s, &canonical, format));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match &cli.out {
        Some(dir) => match write_artifacts(dir, &outcome.artifacts) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => {
            for a in &outcome.artifacts {
                if outcome.artifacts.len() > 1 {
                    println!("==> {} <==", a.name);
                }
                print!("{}", a.contents);
            }
        }
    }
    eprintln!("{}", outcome.summary);
    ExitCode::from(outcome.exit_code() as u8)
}
