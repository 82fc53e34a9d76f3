use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use pursuit_core::harness::{self, ExperimentConfig, Method, Profile, RunOptions};
use pursuit_core::stats::{compare, Alternative};
use pursuit_core::Error;

#[derive(Parser)]
#[command(name = "pursuit", version, about = "Portfolio-pursuit pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial and method, then write the report.
    Run(RunArgs),
    /// Run a single trial.
    Trial {
        #[command(flatten)]
        run: RunArgs,
        /// Trial index under the master seed.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Compare two numeric columns of a CSV file.
    Stats {
        file: PathBuf,
        a: String,
        b: String,
        #[arg(long, value_enum, default_value_t = Alt::TwoSided)]
        alternative: Alt,
    },
    /// Rebuild aggregate, plot data and text report from an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overriding the profile's settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Restrict to these methods (repeatable).
    #[arg(long, value_enum)]
    method: Vec<MethodArg>,
    /// Run trials one at a time.
    #[arg(long)]
    sequential: bool,
    /// Also write burn-in interaction logs.
    #[arg(long)]
    interactions: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pipeline,
    Baseline,
    Rl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alt {
    Less,
    Greater,
    TwoSided,
}

impl RunArgs {
    fn config(&self) -> pursuit_core::Result<ExperimentConfig> {
        let base = ExperimentConfig::profile(match self.profile {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        });
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, &base)?,
            None => base,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if !self.method.is_empty() {
            cfg.methods = self
                .method
                .iter()
                .map(|m| match m {
                    MethodArg::Pipeline => Method::Pipeline,
                    MethodArg::Baseline => Method::Baseline,
                    MethodArg::Rl => Method::Rl,
                })
                .collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            sequential: self.sequential,
            interactions: self.interactions,
            first_trial: 0,
        }
    }
}

enum Failure {
    Config(String),
    Partial(usize),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn run_config(run: &RunArgs) -> Result<ExperimentConfig, Failure> {
    run.config().map_err(|e| match e {
        Error::Config(msg) => Failure::Config(msg),
        other => Failure::Other(other.into()),
    })
}

fn finish(summary: &harness::ExperimentSummary, out: &Path) -> Result<(), Failure> {
    print!("{}", summary.report.text());
    println!("\nwrote {}", out.display());
    if summary.failed_runs > 0 {
        return Err(Failure::Partial(summary.failed_runs));
    }
    Ok(())
}

fn read_column(path: &Path, name: &str) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumns(vec![name.to_string()]))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        out.push(cell.parse().with_context(|| format!("column {name}: {cell:?}"))?);
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(run) => {
            let cfg = run_config(&run)?;
            let summary =
                harness::run_experiment(&cfg, &run.out, run.options()).map_err(anyhow::Error::from)?;
            finish(&summary, &run.out)
        }
        Command::Trial { run, trial } => {
            let mut cfg = run_config(&run)?;
            cfg.trials = 1;
            let opts = RunOptions {
                first_trial: trial,
                ..run.options()
            };
            let summary = harness::run_experiment(&cfg, &run.out, opts).map_err(anyhow::Error::from)?;
            finish(&summary, &run.out)
        }
        Command::Stats {
            file,
            a,
            b,
            alternative,
        } => {
            let xa = read_column(&file, &a)?;
            let xb = read_column(&file, &b)?;
            if xa.is_empty() || xb.is_empty() {
                return Err(Failure::Other(anyhow::anyhow!(
                    "columns need at least one value each"
                )));
            }
            let alt = match alternative {
                Alt::Less => Alternative::Less,
                Alt::Greater => Alternative::Greater,
                Alt::TwoSided => Alternative::TwoSided,
            };
            let c = compare(&xa, &xb, alt).map_err(anyhow::Error::from)?;
            println!(
                "n_a={} n_b={} mean_a={} mean_b={}",
                c.n_a, c.n_b, c.mean_a, c.mean_b
            );
            println!("U={} p={}", c.u, c.p);
            match c.cohens_d {
                Some(d) => println!("cohens_d={d}"),
                None => println!("cohens_d=n/a"),
            }
            println!("cles={}", c.cles);
            Ok(())
        }
        Command::Report { out } => {
            if !out.is_dir() {
                return Err(Failure::Other(anyhow::anyhow!(
                    "{} is not a directory",
                    out.display()
                )));
            }
            let r = harness::report(&out).map_err(anyhow::Error::from)?;
            print!("{}", r.text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} trial run(s) failed; see trials.csv");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
