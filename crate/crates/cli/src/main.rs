//! `poropinn oracle | invert | report`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poropinn::harness::{run_invert, run_oracle, run_report, RunConfig};
use poropinn::Error;

#[derive(Parser)]
#[command(name = "poropinn", version, about = "Sequential PINN inversion of poromechanics benchmarks")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve the reference problem and write fields.csv and sensors.csv
    Oracle(RunArgs),
    /// Recover the coefficients from sensors.csv
    Invert {
        #[command(flatten)]
        run: RunArgs,
        /// run the oracle first instead of reading an existing sensors.csv
        #[arg(long)]
        generate: bool,
    },
    /// Summarize a result directory
    Report {
        /// result directory
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// sensor noise, as a fraction of each series' range
    #[arg(long)]
    noise: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", self.config.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.network.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(n) = self.noise {
            cfg.noise = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Format(_) | Error::Domain(_) | Error::Ad(_) => 2,
        Error::Divergence { .. } | Error::NonFinite { .. } | Error::Newton { .. } => 3,
        Error::Missing(_) => 4,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 4,
        Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.verb {
        Verb::Oracle(args) => {
            let cfg = args.load()?;
            let o = run_oracle(&cfg)?;
            println!(
                "{}: {} sensors, {} time levels written to {}",
                cfg.benchmark(),
                o.sensors.len(),
                o.table.times.len(),
                cfg.out.display()
            );
            for c in &o.checks {
                let mark = if c.passed() { "ok" } else { "FAIL" };
                println!("  residual {:<12} max {:.3e} (tol {:.0e}) {mark}", c.equation, c.max, c.tol);
            }
        }
        Verb::Invert { run, generate } => {
            let cfg = run.load()?;
            run_invert(&cfg, generate)?;
            print!("{}", run_report(&cfg.out)?);
        }
        Verb::Report { dir, out } => {
            let dir = dir.or(out).unwrap_or_else(|| PathBuf::from("results"));
            print!("{}", run_report(&dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
