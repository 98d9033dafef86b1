//! The `pgglmc` command line.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 configuration or
//! parameter error, 3 divergence or non-finite potential value, 4 step size
//! at or above the cap.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{ExperimentConfig, Resolved};
use super::report::{
    bounds_table, checks_table, samples_csv, BoundsReport, Check, ResolvedEcho, SampleMetrics, SampleReport, SOFTWARE,
    VERSION,
};
use super::suites::{self, Scale};
use crate::error::Error;
use crate::lmc::{lemma3_w2_bound, run_chain, theorem1_bound};
use crate::smoothing::{lemma1_gap_bound, lemma1_gap_envelope, lemma2_bias_bound};
use crate::transport::{w2_to_reference, ASSIGNMENT_CAP};

#[derive(Debug, Parser)]
#[command(name = "pgglmc", version, about = "Black-box Langevin Monte Carlo with p-generalized Gaussian smoothing")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads for the chain pool.
    #[arg(long, global = true, value_name = "N", env = "PGGLMC_THREADS")]
    pub threads: Option<usize>,

    /// Only errors go to stderr; nothing goes to stdout.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the chains of a configuration and write samples and a report.
    Sample,
    /// Run a verification suite: moments, lemma1, lemma2, mixing, transport or all.
    Verify {
        suite: String,
        #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
        scale: ScaleArg,
    },
    /// Print the constants and bounds of a configuration without sampling.
    Bounds,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Acceptance,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Acceptance => Scale::Acceptance,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter { .. } | Error::Dimension { .. } | Error::Unsupported(_) => 2,
        Error::Evaluation { .. } | Error::Divergence(_) => 3,
        Error::StepSize { .. } => 4,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => Some(pool),
            Err(e) => {
                eprintln!("error: cannot start thread pool: {e}");
                return 2;
            }
        },
        None => None,
    };
    let go = || match &cli.command {
        Command::Sample => cmd_sample(&cli),
        Command::Verify { suite, scale } => cmd_verify(&cli, suite, (*scale).into()),
        Command::Bounds => cmd_bounds(&cli),
    };
    let outcome = match pool {
        Some(pool) => pool.install(go),
        None => go(),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: 2, message }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 2, message: format!("cannot write {}: {e}", path.display()) }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| config_failure("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(|e| config_failure(e.0))?;
    if let Some(seed) = cli.seed {
        cfg.lmc.seed = seed;
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

/// Constants and bounds of a resolved configuration.
pub fn bounds_report(cfg: &ExperimentConfig, r: &Resolved) -> crate::error::Result<BoundsReport> {
    let (mu, p) = (r.scfg.mu(), r.scfg.p());
    let base = r.pot.base().as_ref();
    let m = r.pot.smoothness_constant(mu, p)?;
    Ok(BoundsReport {
        eta: r.lcfg.eta,
        eta_cap: r.eta_cap,
        w2_init: r.w2_init,
        smoothing_gap: lemma1_gap_bound(base, mu, p)?,
        smoothing_gap_envelope: lemma1_gap_envelope(base, mu, p)?,
        estimator_bias_sq: lemma2_bias_bound(m, r.pot.lambda(), mu, r.pot.dim(), p),
        lemma3: lemma3_w2_bound(&r.pot, mu, p, cfg.report.xstar_norm_sq)?,
        theorem1: theorem1_bound(&r.pot, &r.scfg, &r.lcfg, r.w2_init, cfg.report.xstar_norm_sq, cfg.report.c)?,
    })
}

fn cmd_sample(cli: &Cli) -> Result<i32, Failure> {
    let cfg = load_config(cli)?;
    let r = cfg.resolve()?;
    let bounds = bounds_report(&cfg, &r)?;

    let start = Instant::now();
    let result = run_chain(&r.pot, &r.scfg, &r.lcfg)?;
    let runtime = start.elapsed().as_secs_f64();

    let (d, n) = (result.dim, result.chains);
    let mut mean = vec![0.0; d];
    let mut mean_sq_norm = 0.0;
    for c in 0..n {
        let x = result.state(c);
        for j in 0..d {
            mean[j] += x[j] / n as f64;
        }
        mean_sq_norm += x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    }

    let mut notes = Vec::new();
    let mut w2_to_target = None;
    if !cfg.report.reference_w2 {
        notes.push("W2 to the target disabled by report.reference_w2".to_string());
    } else if r.pot.base().infimum().is_none() {
        notes.push("no exact sampler for this target; W2 to the target not computed".to_string());
    } else if n > ASSIGNMENT_CAP {
        notes.push(format!(
            "{n} chains exceed the exact-assignment cap {ASSIGNMENT_CAP}; W2 to the target not computed"
        ));
    } else {
        let pot = &r.pot;
        let reference = w2_to_reference(&result.final_sample_set(), cfg.report.resamples, cfg.lmc.seed, |rng, row| {
            row.copy_from_slice(&pot.sample_target(rng).expect("infimum is known"));
        })?;
        w2_to_target = Some(reference);
    }

    let mut checks = Vec::new();
    if let Some(w) = &w2_to_target {
        checks.push(Check::at_most(
            "W2 to target <= mixing bound",
            w.max,
            bounds.theorem1.w2_mixing,
            format!("largest of {} resampled W2 at N = {n}; bound uses C = {}", w.values.len(), cfg.report.c),
        ));
    }

    let report = SampleReport {
        software: SOFTWARE,
        version: VERSION,
        config: cfg.clone(),
        resolved: ResolvedEcho { eta: r.lcfg.eta, eta_cap: r.eta_cap, w2_init: r.w2_init, thinning: r.lcfg.thinning },
        metrics: SampleMetrics {
            chains: n,
            dim: d,
            steps: r.lcfg.steps,
            evals_total: result.evals_total,
            runtime_seconds: runtime,
            mean,
            mean_sq_norm,
            w2_to_target,
            notes,
        },
        bounds: Some(bounds),
        checks,
    };
    let csv_path = write_file(&cli.out, &cfg.report.csv, &samples_csv(&result))?;
    let json_path = write_file(&cli.out, &cfg.report.json, &to_json(&report))?;
    if let Some(traj) = &result.trajectory {
        let mut text = String::from("step,chain");
        for j in 0..d {
            text.push_str(&format!(",coordinate_{j}"));
        }
        text.push('\n');
        for (k, block) in traj.steps.iter().zip(&traj.states) {
            for (c, x) in block.chunks_exact(d).enumerate() {
                text.push_str(&format!("{k},{c}"));
                for v in x {
                    text.push_str(&format!(",{v:?}"));
                }
                text.push('\n');
            }
        }
        write_file(&cli.out, "trajectory.csv", &text)?;
    }

    if !cli.quiet {
        println!(
            "{n} chains x {} steps in d = {d}, eta = {} (cap {})",
            r.lcfg.steps,
            super::report::sig9(r.lcfg.eta),
            super::report::sig9(r.eta_cap)
        );
        if let Some(w) = &report.metrics.w2_to_target {
            println!("W2 to target: mean {} over {} resamples", super::report::sig9(w.mean), w.values.len());
        }
        for note in &report.metrics.notes {
            println!("note: {note}");
        }
        if !report.checks.is_empty() {
            print!("{}", checks_table("checks", &report.checks));
        }
        println!("wrote {} and {}", csv_path.display(), json_path.display());
    }
    Ok(0)
}

fn cmd_verify(cli: &Cli, suite: &str, scale: Scale) -> Result<i32, Failure> {
    let seed = match (cli.seed, &cli.config) {
        (Some(s), _) => s,
        (None, Some(_)) => load_config(cli)?.lmc.seed,
        (None, None) => 0,
    };
    let reports = suites::run(suite, scale, seed)?;
    let mut all_pass = true;
    for report in &reports {
        all_pass &= report.passed();
        write_file(&cli.out, &format!("verify_{}.json", report.suite), &to_json(report))?;
        if !cli.quiet {
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            let title = format!(
                "suite {} ({} scale, seed {}): {verdict} in {:.1} s",
                report.suite, report.scale, report.seed, report.runtime_seconds
            );
            println!("{}", checks_table(&title, &report.checks));
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_bounds(cli: &Cli) -> Result<i32, Failure> {
    let cfg = load_config(cli)?;
    let r = cfg.resolve()?;
    let bounds = bounds_report(&cfg, &r)?;
    if !cli.quiet {
        print!("{}", bounds_table(&bounds));
    }
    Ok(0)
}
