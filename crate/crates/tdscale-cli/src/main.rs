use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tdscale_cli::{catalog, run, scenario};

#[derive(Parser)]
#[command(
    name = "tdscale",
    version,
    about = "Scales, tidy subgroups and flat groups on explicit models"
)]
struct Cli {
    /// Worker threads for the catalog.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and print the JSON report.
    Run { file: PathBuf },
    /// Evaluate the built-in example catalog.
    Catalog {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Build a coset tree ball and write it as DOT.
    Treerep {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long)]
        dot: PathBuf,
    },
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load(file: &PathBuf) -> Result<scenario::Resolved> {
    let src = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let sc = scenario::parse(&src).with_context(|| file.display().to_string())?;
    scenario::resolve(&src, &sc).with_context(|| file.display().to_string())
}

fn real_main(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Run { file } => {
            let r = load(&file)?;
            let out = if r.command == scenario::Command::Catalog {
                let rows = catalog::run_catalog(cli.jobs);
                let ok = rows.iter().all(|r| r.pass);
                run::Outcome {
                    report: catalog::rows_json(&rows),
                    exit: if ok { 0 } else { run::EXIT_NEGATIVE },
                }
            } else {
                run::execute(&r)
            };
            emit(&serde_json::to_string_pretty(&out.report)?)?;
            Ok(out.exit as u8)
        }
        Cmd::Catalog { json } => {
            let rows = catalog::run_catalog(cli.jobs);
            if json {
                emit(&serde_json::to_string_pretty(&catalog::rows_json(&rows))?)?;
            } else {
                emit(catalog::render_table(&rows).trim_end())?;
            }
            Ok(if rows.iter().all(|r| r.pass) { 0 } else { 1 })
        }
        Cmd::Treerep { file, radius, dot } => {
            let r = load(&file)?;
            match run::tree_for(&r, radius) {
                Ok(t) => {
                    std::fs::write(&dot, tdscale::treerep::export_dot(&t))
                        .with_context(|| format!("writing {}", dot.display()))?;
                    emit(&serde_json::to_string_pretty(&t)?)?;
                    Ok(0)
                }
                Err(e) => {
                    emit(&serde_json::to_string_pretty(&run::error_json(&e))?)?;
                    Ok(if run::is_negative(&e) {
                        run::EXIT_NEGATIVE as u8
                    } else {
                        run::EXIT_ERROR as u8
                    })
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
