//! `cframe`: batch front end for the controlled-frame toolkit.
//!
//! Exit codes: 0 when every selected check passes (a check whose hypotheses
//! fail on the instance counts as a pass with a warning unless
//! `--strict-hypotheses`), 1 when a check fails, 2 on input errors.

pub mod config;
pub mod json;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use cframe::{Check, CheckOptions, FrameBounds, Requirement, Verdict, VerificationReport};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Loaded;

pub const SCHEMA: &str = "cframe-report/1";

/// Check selectors accepted by `--checks`, in report order.
pub const CHECK_LABELS: [(&str, Check); 16] = [
    ("def-2.1", Check::KFrame),
    ("def-2.2", Check::ControlledKFrame),
    ("thm-2.4", Check::NormCharacterization),
    ("lem-2.5", Check::SqrtDomination),
    ("thm-2.6", Check::SynthesisBound),
    ("prop-2.7", Check::OperatorSandwich),
    ("prop-2.8", Check::LowerFromOperatorInequality),
    ("prop-2.9", Check::ControlledToPlain),
    ("prop-2.10", Check::PlainToControlled),
    ("thm-2.11", Check::MFrameTransfer),
    ("prop-2.12", Check::ImageBessel),
    ("thm-2.13", Check::ImageClosedRange),
    ("thm-2.14", Check::ImageIsometry),
    ("douglas", Check::Douglas),
    ("lemma-1.2", Check::SurjectivityDuality),
    ("lemma-1.3", Check::NormBoundConstant),
];

pub fn label(check: Check) -> &'static str {
    CHECK_LABELS.iter().find(|(_, c)| *c == check).expect("every check is labelled").0
}

#[derive(Debug, Parser)]
#[command(
    name = "cframe",
    version,
    about = "Verify continuous controlled K-frames on finite-dimensional Hilbert C*-modules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the optimal controlled and plain frame bounds.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run checks and print the report.
    Verify(RunArgs),
    /// Run checks and write the report to a file.
    Report {
        #[command(flatten)]
        run: RunArgs,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Comma-separated check names, or `all`.
    #[arg(long, default_value = "all")]
    pub checks: String,
    /// Treat unmet hypotheses as failures.
    #[arg(long)]
    pub strict_hypotheses: bool,
    /// Sampling seed; falls back to the config, then `CFRAME_SEED`, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Positivity floor and inequality slack (relative).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Bounds `A,B` to certify in the controlled-frame check.
    #[arg(long, value_parser = parse_pair)]
    pub assert_bounds: Option<(f64, f64)>,
    /// Lower-bound candidate for the operator-inequality check.
    #[arg(long)]
    pub a_candidate: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("A: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("B: {e}"))?;
    Ok((a, b))
}

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Serialize)]
pub struct BoundsOutput {
    #[serde(flatten)]
    pub controlled: FrameBounds,
    pub plain: Option<FrameBounds>,
}

#[derive(Debug, Serialize)]
pub struct RunResult {
    pub schema: &'static str,
    pub seed: u64,
    pub summary: &'static str,
    pub warnings: Vec<String>,
    pub constants: BTreeMap<&'static str, f64>,
    pub reports: Vec<VerificationReport>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cframe: error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let started = Instant::now();
    let code = match cli.command {
        Command::Bounds { config, tol } => {
            let loaded = config::load(&config, tol)?;
            let controlled = loaded.instance.controlled_bounds().map_err(|e| anyhow!("{e}"));
            let controlled = match controlled {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("cframe: {e}");
                    return Ok(EXIT_FAIL);
                }
            };
            let out = BoundsOutput { controlled, plain: loaded.instance.plain_bounds().ok() };
            print!("{}", json::to_string(&out)?);
            EXIT_PASS
        }
        Command::Verify(args) => {
            let (result, code) = run(&args)?;
            print!("{}", json::to_string(&result)?);
            code
        }
        Command::Report { run: args, output } => {
            let (result, code) = run(&args)?;
            write_report(&output, &result)?;
            code
        }
    };
    eprintln!("cframe: finished in {:.1} ms", started.elapsed().as_secs_f64() * 1e3);
    Ok(code)
}

fn write_report(path: &Path, result: &RunResult) -> anyhow::Result<()> {
    std::fs::write(path, json::to_string(result)?).with_context(|| format!("cannot write {}", path.display()))
}

/// Resolves `--checks`. `all` keeps the checks whose operators are present;
/// naming a check whose operator is missing is an input error.
pub fn select_checks(spec: &str, loaded: &Loaded) -> anyhow::Result<Vec<Check>> {
    let inst = &loaded.instance;
    let present = |c: Check| match c.requirement() {
        Requirement::None => true,
        Requirement::T => inst.t().is_some(),
        Requirement::M => inst.m().is_some(),
    };
    let names: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        bail!("empty check selection");
    }
    let mut selected = Vec::new();
    for name in names {
        if name == "all" {
            for (label, c) in CHECK_LABELS {
                if present(c) {
                    selected.push(c);
                } else {
                    eprintln!("cframe: skipping {label} (needs {:?})", c.requirement());
                }
            }
            continue;
        }
        let (_, c) = CHECK_LABELS.iter().find(|(l, _)| *l == name).ok_or_else(|| anyhow!("unknown check `{name}`"))?;
        if !present(*c) {
            bail!("check {name} needs operator {:?}, which the config does not provide", c.requirement());
        }
        selected.push(*c);
    }
    selected.sort_by_key(|c| CHECK_LABELS.iter().position(|(_, x)| x == c));
    selected.dedup();
    Ok(selected)
}

fn env_seed() -> anyhow::Result<u64> {
    match std::env::var("CFRAME_SEED") {
        Ok(v) => v.trim().parse().with_context(|| format!("CFRAME_SEED: not an unsigned integer: `{v}`")),
        Err(_) => Ok(0),
    }
}

pub fn run(args: &RunArgs) -> anyhow::Result<(RunResult, i32)> {
    let loaded = config::load(&args.config, args.tol)?;
    let checks = select_checks(&args.checks, &loaded)?;
    let seed = match args.seed.or(loaded.seed) {
        Some(s) => s,
        None => env_seed()?,
    };
    let opts = CheckOptions {
        asserted_bounds: args.assert_bounds.or(loaded.assert_bounds),
        a_candidate: args.a_candidate.or(loaded.a_candidate),
        ..CheckOptions::default()
    };
    let reports: Vec<VerificationReport> = checks
        .par_iter()
        .map(|&c| {
            c.run(&loaded.instance, &opts, seed).map(|mut r| {
                r.check = label(c).to_string();
                r
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("{e}"))?;

    let mut warnings = Vec::new();
    let mut failed = false;
    for r in &reports {
        match r.verdict {
            Verdict::Pass => {}
            Verdict::Fail => failed = true,
            Verdict::HypothesesNotMet => {
                let unmet: Vec<&str> = r.hypotheses.iter().filter(|(_, c)| !c.pass).map(|(n, _)| n.as_str()).collect();
                warnings.push(format!("{}: hypotheses not met ({})", r.check, unmet.join(", ")));
                failed |= args.strict_hypotheses;
            }
        }
    }
    for w in &warnings {
        eprintln!("cframe: warning: {w}");
    }
    let mut constants = BTreeMap::new();
    if let Ok(b) = loaded.instance.controlled_bounds() {
        constants.insert("A", b.lower);
        constants.insert("B", b.upper);
    }
    let result =
        RunResult { schema: SCHEMA, seed, summary: if failed { "fail" } else { "pass" }, warnings, constants, reports };
    Ok((result, if failed { EXIT_FAIL } else { EXIT_PASS }))
}
