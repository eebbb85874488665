//! `gbl` command-line interface.
//!
//! Exit codes: 0 success, 1 invariant violation or failed run, 2 configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{exact_min_cover, greedy_clique_cover, parse_graph, write_graph};
use crate::harness::check::run_checks;
use crate::harness::config::ExperimentConfig;
use crate::harness::diagnostics::{bound_rhs, mean_std};
use crate::harness::output::{aggregate_dir, write_json, write_run, BoundReport, BOUND_JSON};
use crate::harness::run::{run_experiment, Algorithm, RegimeKind, RunOutput, Scenario, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable capping the number of worker threads of a sweep.
pub const THREADS_ENV: &str = "GBL_THREADS";

const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "gbl", version, about = "Online learning with feedback graphs: simulate, monitor, and aggregate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seed of an experiment and write its trace and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seed to run; defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output.dir`, else `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a range of seeds in parallel, then aggregate them.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Half-open range `A..B`, or inclusive `A..=B`.
        #[arg(long)]
        seeds: SeedRange,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the per-seed results in a directory.
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant and oracle checks.
    Check,
    /// Compute a clique cover of a graph file and print it in graph-file syntax.
    Cover {
        #[arg(long)]
        graph: PathBuf,
        /// Minimum cover by exhaustive search (small graphs only) instead of greedy.
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    /// Exclusive.
    pub end: u64,
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("expected `A..B` or `A..=B`, got `{s}`");
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start: u64 = a.trim().parse().map_err(|_| bad())?;
        let end = match b.strip_prefix('=') {
            Some(b) => b.trim().parse::<u64>().map_err(|_| bad())?.checked_add(1).ok_or_else(bad)?,
            None => b.trim().parse().map_err(|_| bad())?,
        };
        if end <= start {
            return Err(format!("seed range `{s}` is empty"));
        }
        Ok(SeedRange { start, end })
    }
}

/// Failure of a subcommand, tagged with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    fn from_run(e: Error) -> Self {
        let code = if e.is_config_error() { EXIT_CONFIG } else { EXIT_VIOLATION };
        Self { code, message: e.to_string() }
    }
}

/// Entry point of the `gbl` binary; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()),
        Command::Sweep { config, seeds, out } => cmd_sweep(&config, seeds, out.as_deref()),
        Command::Aggregate { input, out } => cmd_aggregate(&input, out.as_deref()),
        Command::Check => cmd_check(),
        Command::Cover { graph, exact } => cmd_cover(&graph, exact),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(config_path: &Path, out: Option<&Path>) -> std::result::Result<(ExperimentConfig, Scenario, PathBuf), Failure> {
    let loaded = ExperimentConfig::load(config_path).map_err(Failure::config)?;
    let (scenario, warnings) = loaded.config.resolve(&loaded.base_dir).map_err(Failure::config)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let out_dir = match (out, &loaded.config.output.dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => loaded.base_dir.join(d),
        (None, None) => PathBuf::from(DEFAULT_OUT_DIR),
    };
    Ok((loaded.config, scenario, out_dir))
}

/// Exit code for a finished run: violations of the per-round monitors or of the
/// penalty bound (where it applies) are invariant failures.
fn run_status(output: &RunOutput) -> i32 {
    let s = &output.summary;
    if s.violations.total() > 0 {
        eprintln!(
            "invariant violation (seed {}): {} stability-ratio and {} shifted-loss rounds",
            s.seed, s.violations.stability_ratio, s.violations.shifted_loss
        );
        return EXIT_VIOLATION;
    }
    if let Some(p) = s.penalty {
        if p.applicable && !p.holds() {
            eprintln!("invariant violation (seed {}): penalty {} exceeds its bound {}", s.seed, p.penalty, p.rhs);
            return EXIT_VIOLATION;
        }
    }
    EXIT_OK
}

fn print_run(output: &RunOutput) {
    let s = &output.summary;
    println!(
        "seed {}: {} regret {} over {} rounds, corruption {}, violations {}",
        s.seed,
        s.algorithm.name(),
        s.final_regret,
        s.horizon,
        s.realized_corruption,
        s.violations.total()
    );
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> std::result::Result<i32, Failure> {
    let (config, scenario, out_dir) = load(config, out)?;
    let seed = seed.unwrap_or_else(|| config.seeds.to_vec()[0]);
    let output = run_experiment(&scenario, seed).map_err(Failure::from_run)?;
    write_run(&out_dir, &output.trace, &output.summary).map_err(Failure::config)?;
    print_run(&output);
    Ok(run_status(&output))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

fn cmd_sweep(config: &Path, seeds: SeedRange, out: Option<&Path>) -> std::result::Result<i32, Failure> {
    let (_, scenario, out_dir) = load(config, out)?;
    let pool = thread_pool().map_err(Failure::config)?;
    let seeds: Vec<u64> = (seeds.start..seeds.end).collect();
    let outputs: Vec<RunOutput> = pool
        .install(|| seeds.par_iter().map(|&s| run_experiment(&scenario, s)).collect::<Result<Vec<_>>>())
        .map_err(Failure::from_run)?;

    let mut code = EXIT_OK;
    for output in &outputs {
        write_run(&out_dir, &output.trace, &output.summary).map_err(Failure::config)?;
        print_run(output);
        code = code.max(run_status(output));
    }
    let (summary, _) = aggregate_dir(&out_dir, &out_dir).map_err(Failure::config)?;
    println!(
        "mean regret {} (std {}) over {} seeds",
        summary.mean_final_regret,
        summary.std_final_regret,
        summary.seeds.len()
    );

    let traces: Vec<_> = outputs.iter().map(|o| o.trace.clone()).collect();
    let bound_possible = scenario.algorithm == Algorithm::GraphFtrl
        && scenario.monitors.bound_rhs
        && traces[0].regime == RegimeKind::Stochastic;
    if bound_possible {
        let bound = bound_rhs(&traces).map_err(Failure::from_run)?;
        let finals: Vec<f64> = outputs.iter().map(|o| o.summary.final_regret).collect();
        let mean_regret = mean_std(&finals).0;
        let holds = bound.applicable.then_some(mean_regret <= bound.value);
        if holds.is_none() {
            eprintln!("warning: N*T < 3^11, regret bound reported but not checked");
        }
        if holds == Some(false) {
            eprintln!("invariant violation: mean regret {mean_regret} exceeds the bound {}", bound.value);
            code = code.max(EXIT_VIOLATION);
        }
        let report = BoundReport { schema_version: SCHEMA_VERSION, mean_regret, bound, holds };
        write_json(&out_dir.join(BOUND_JSON), &report).map_err(Failure::config)?;
        println!("regret bound {} (mean regret {mean_regret})", bound.value);
    }
    Ok(code)
}

fn cmd_aggregate(input: &Path, out: Option<&Path>) -> std::result::Result<i32, Failure> {
    let (summary, paths) = aggregate_dir(input, out.unwrap_or(input)).map_err(Failure::config)?;
    println!(
        "mean regret {} (std {}) over {} seeds",
        summary.mean_final_regret,
        summary.std_final_regret,
        summary.seeds.len()
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(if summary.total_violations > 0 { EXIT_VIOLATION } else { EXIT_OK })
}

fn cmd_check() -> std::result::Result<i32, Failure> {
    let mut code = EXIT_OK;
    for c in run_checks() {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            code = EXIT_VIOLATION;
        }
    }
    Ok(code)
}

fn cmd_cover(path: &Path, exact: bool) -> std::result::Result<i32, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let doc = parse_graph(&text).map_err(Failure::config)?;
    let cover = if exact { exact_min_cover(&doc.graph).map_err(Failure::config)? } else { greedy_clique_cover(&doc.graph) };
    print!("{}", write_graph(&doc.graph, Some(&cover)));
    eprintln!("{} cliques", cover.len());
    Ok(EXIT_OK)
}
