//! `ciltlab`: runs one experiment and writes a JSON report.
//!
//! The report holds no timing and no thread count, so a rerun with the same
//! parameters and seed reproduces it byte for byte. Wall time goes to
//! standard error.

mod commands;
mod kv;

use anyhow::Context;
use clap::Parser;
use commands::{Ctx, Failure, Row, Sub};
use kv::{Params, Usage};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

const GLOBAL_HELP: &str = "\
Parameters are given as --key value (or --key=value). Keys common to all subcommands:
  --config <path>     key=value file; command-line flags win
  --seed <u64>        Monte Carlo seed (default 0)
  --n-samples <u64>   Monte Carlo sample count (subcommand default otherwise)
  --out <path>        write the JSON report here and print a summary
  --csv <path>        write the per-term table (term_id,value_re,value_im,stderr,n_samples)
  --threads <n>       worker cap (default: CILTLAB_THREADS, else all cores)

Exit codes: 0 success, 2 invalid input, 3 numerical failure.";

#[derive(Parser)]
#[command(name = "ciltlab", version, about = "Numerical experiments for compactified imaginary Liouville theory", after_help = GLOBAL_HELP)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Sub,
    /// Subcommand parameters, --key value
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    rest: Vec<String>,
}

/// Keys that steer the run but do not enter the report.
const PLUMBING: [&str; 4] = ["config", "out", "csv", "threads"];

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: Sub,
    seed: u64,
    n_samples: Option<u64>,
    inputs: BTreeMap<&'a str, &'a str>,
    params: Option<ciltlab_core::ParamSet>,
    result: serde_json::Value,
}

enum Exit {
    Usage(String),
    Numerical(String),
}

impl From<Usage> for Exit {
    fn from(u: Usage) -> Self {
        Exit::Usage(u.0)
    }
}

impl From<Failure> for Exit {
    fn from(f: Failure) -> Self {
        match f {
            Failure::Usage(u) => Exit::Usage(u.0),
            Failure::Core(e) if e.is_numerical() => Exit::Numerical(e.to_string()),
            Failure::Core(e) => Exit::Usage(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Exit {
    fn from(e: anyhow::Error) -> Self {
        Exit::Usage(format!("{e:#}"))
    }
}

fn csv(rows: &[Row]) -> String {
    let mut s = String::from("term_id,value_re,value_im,stderr,n_samples\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.term_id, r.value.re, r.value.im, r.stderr, r.n_samples));
    }
    s
}

fn threads(p: &Params) -> Result<Option<usize>, Exit> {
    if let Some(n) = p.opt::<usize>("threads", "a positive integer")? {
        return Ok(Some(n));
    }
    match std::env::var("CILTLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Exit::Usage(format!("CILTLAB_THREADS: expected a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Exit> {
    let mut p = Params::from_args(&cli.rest)?;
    if let Some(path) = p.raw("config").map(str::to_owned) {
        let text = std::fs::read_to_string(&path).with_context(|| format!("--config: cannot read {path}"))?;
        p.merge_file(&text, &path)?;
    }
    let seed = p.u64_or("seed", 0)?;
    let n_samples = p.opt::<u64>("n-samples", "a positive integer")?;
    if n_samples == Some(0) {
        return Err(Exit::Usage("--n-samples: expected a positive integer, got '0'".into()));
    }
    let out = p.raw("out").map(str::to_owned);
    let csv_path = p.raw("csv").map(str::to_owned);
    if let Some(n) = threads(&p)? {
        if n == 0 {
            return Err(Exit::Usage("--threads: expected a positive integer, got '0'".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    let start = Instant::now();
    let ctx = Ctx { p: &p, seed, n_samples };
    let outcome = commands::run(cli.subcommand, &ctx)?;
    let unused = p.unused();
    if !unused.is_empty() {
        return Err(Exit::Usage(format!(
            "unknown key(s) for {:?}: {}",
            cli.subcommand,
            unused.iter().map(|k| format!("--{k}")).collect::<Vec<_>>().join(", ")
        )));
    }
    let inputs = p
        .echo()
        .iter()
        .filter(|(k, _)| !PLUMBING.contains(&k.as_str()))
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    let report = Report {
        tool: "ciltlab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.subcommand,
        seed,
        n_samples,
        inputs,
        params: outcome.params,
        result: outcome.result,
    };
    let mut text = serde_json::to_string_pretty(&report).context("report serialization")?;
    text.push('\n');
    match &out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("--out: cannot write {path}"))?;
            println!("{}", outcome.summary);
        }
        None => {
            std::io::stdout().write_all(text.as_bytes()).context("stdout")?;
            eprintln!("{}", outcome.summary);
        }
    }
    if let Some(path) = csv_path {
        std::fs::write(&path, csv(&outcome.rows)).with_context(|| format!("--csv: cannot write {path}"))?;
    }
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Exit::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
