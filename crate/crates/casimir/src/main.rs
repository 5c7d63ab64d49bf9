//! `casimir` command line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use casimir::driver;

#[derive(Parser)]
#[command(
    name = "casimir",
    version,
    about = "Casimir energy between rigid 3-D obstacles via boundary elements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (CASIMIR_THREADS overrides).
    #[arg(long)]
    workers: Option<usize>,
    /// Log level: quiet, info or debug.
    #[arg(long, default_value = "info")]
    log: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run energy pipelines and write integrand.csv / energy.csv.
    Run(CommonRunArgs),
    /// Compare Krylov solvers against the dense reference (solver.csv).
    Compare(CommonRunArgs),
    /// Generate a body mesh and write it in OFF format.
    Mesh {
        /// sphere, ellipsoid, torus or box.
        kind: String,
        /// Target mesh size.
        #[arg(long)]
        h: f64,
        #[arg(long)]
        radius: Option<f64>,
        /// Comma separated, e.g. 0.5,0.5,1.0
        #[arg(long, value_delimiter = ',')]
        semi_axes: Option<Vec<f64>>,
        #[arg(long)]
        major: Option<f64>,
        #[arg(long)]
        minor: Option<f64>,
        /// Comma separated, e.g. 1,1,1
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<f64>>,
        /// Output OFF file.
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(driver::exit_code(&err) as u8)
        }
    }
}

fn dispatch(cli: Cli) -> casimir::Result<()> {
    match cli.command {
        Command::Run(args) => {
            driver::set_log_level(&args.log)?;
            let cfg = driver::RunConfig::load(&args.config)?;
            driver::init_workers(args.workers, cfg.workers);
            let outcome = driver::run(&cfg, args.out)?;
            print!("{}", outcome.summary);
            println!("reports written to {}", outcome.out_dir.display());
            Ok(())
        }
        Command::Compare(args) => {
            driver::set_log_level(&args.log)?;
            let cfg = driver::RunConfig::load(&args.config)?;
            driver::init_workers(args.workers, cfg.workers);
            let outcome = driver::compare(&cfg, args.out)?;
            print!("{}", outcome.summary);
            println!("reports written to {}", outcome.out_dir.display());
            Ok(())
        }
        Command::Mesh {
            kind,
            h,
            radius,
            semi_axes,
            major,
            minor,
            edges,
            output,
        } => {
            let to_triple = |v: Option<Vec<f64>>, what: &str| -> casimir::Result<Option<[f64; 3]>> {
                match v {
                    None => Ok(None),
                    Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
                    Some(v) => Err(casimir::Error::Config(format!(
                        "{what} needs exactly three values, got {}",
                        v.len()
                    ))),
                }
            };
            let semi_axes = to_triple(semi_axes, "--semi-axes")?;
            let edges = to_triple(edges, "--edges")?;
            driver::generate_mesh(&kind, h, radius, semi_axes, major, minor, edges, &output)
        }
    }
}
