use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use hypercurve::job::{self, JobSpec, RunOptions};
use hypercurve::{paths, props};

#[derive(Parser)]
#[command(name = "hypercurve", version, about = "Bicomplex line integrals along hyperbolic-parameter paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a TOML job and write a JSON report.
    Run {
        job: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for property checks.
        #[arg(long)]
        seed: Option<u64>,
        /// Run independent tasks concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Run a seeded property suite ("all" for every suite).
    Check {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = job::DEFAULT_CASES)]
        cases: usize,
    },
    /// Evaluate a constant expression and print both renderings.
    Eval { expr: String },
    /// Sample a path of a job as CSV.
    Trace {
        job: PathBuf,
        path: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Run {
            job,
            out,
            seed,
            parallel,
        } => {
            let opts = RunOptions {
                seed,
                parallel,
                ..RunOptions::from_env()?
            };
            let report = job::run_file(&job, &opts)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{}", report.to_json())?;
            w.flush()?;
            Ok(report.exit_code() as u8)
        }
        Command::Check { suite, seed, cases } => {
            let reports = props::run_suite(&suite, seed, cases)?;
            let mut failed = false;
            for r in &reports {
                println!(
                    "{:<24} {} ({} cases, seed {}, {} failures)",
                    r.suite,
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.cases,
                    r.seed,
                    r.failures.len()
                );
                for f in &r.failures {
                    failed = true;
                    println!("  case {}: {}: {}", f.case, f.property, f.detail);
                    for line in f.fragment.lines() {
                        println!("    {line}");
                    }
                }
            }
            Ok(if failed { 2 } else { 0 })
        }
        Command::Eval { expr } => {
            let z = job::constant("expr", &expr)?;
            println!("{}", z.to_cartesian_string());
            println!("{}", z.to_idempotent_string());
            Ok(0)
        }
        Command::Trace {
            job,
            path,
            samples,
            out,
        } => {
            let text = std::fs::read_to_string(&job).with_context(|| format!("cannot read {}", job.display()))?;
            let spec = JobSpec::from_toml(&text)?;
            let def = spec
                .paths
                .get(&path)
                .ok_or_else(|| anyhow!("no path named '{path}' in {}", job.display()))?;
            let g = def.build(&format!("paths.{path}"))?;
            let mut w = sink(out.as_deref())?;
            paths::write_trace_csv(&mut w, &g.trace(samples)?)?;
            w.flush()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
