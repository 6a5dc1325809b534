use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use magweyl::verify::{self, Config, ExportObject, Overrides};

#[derive(Parser)]
#[command(name = "magweyl", version, about = "Magnetic Weyl calculus verification driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write report.json plus CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// roundtrip, gauge, commutators, product, expansion, parametrix, resolvent,
        /// funcalc, trace, zak, equivariant or all
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Tolerance for every defect check without its own override.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Export the first configured symbol, its operator, or the roundtrip report.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        object: Object,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Object {
    Symbol,
    Operator,
    Report,
}

fn schema_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    verify::configure_threads();
    match cli.command {
        Command::Run { config, suite, out, eps, lambda, grid, tol } => {
            let cfg = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => return schema_failure(e),
            };
            if !out.is_dir() {
                return schema_failure(format!("output directory {} does not exist", out.display()));
            }
            let overrides = Overrides { eps, lambda, grid, tol };
            let report = match verify::run(&cfg, &suite, &overrides) {
                Ok(r) => r,
                Err(e) => return schema_failure(e),
            };
            if let Err(e) = report.write(&out) {
                return schema_failure(e);
            }
            for c in &report.checks {
                let tag = if c.pass { "ok  " } else { "FAIL" };
                println!("{tag} {:<48} defect {:.3e}  tol {:.1e}", c.name, c.defect, c.tolerance);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("failing checks:");
                for c in report.failures() {
                    match &c.error {
                        Some(msg) => eprintln!("  {}: {msg}", c.name),
                        None => eprintln!("  {}: lhs {} rhs {} defect {:e} > {:e}", c.name, c.lhs, c.rhs, c.defect, c.tolerance),
                    }
                }
                ExitCode::from(1)
            }
        }
        Command::Export { config, object, out } => {
            let cfg = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => return schema_failure(e),
            };
            let object = match object {
                Object::Symbol => ExportObject::Symbol,
                Object::Operator => ExportObject::Operator,
                Object::Report => ExportObject::Report,
            };
            match verify::export(&cfg, object, &out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e @ (magweyl::Error::Io(_) | magweyl::Error::Schema(_))) => schema_failure(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
