//! The `umpr` command line: `fit`, `select`, `experiment` and `penalty`.
//!
//! Settings come from an optional `--config` file of `key = value` lines and
//! are overridden by trailing `key=value` arguments. Exit codes: 0 on
//! success, 2 for configuration or input errors, 3 when a computation fails.

pub mod config;
pub mod data;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::Rng;

use crate::error::Error;
use crate::penalties::penalty;
use crate::rng::stream;
use crate::selection::{cv_select_alpha, cv_select_k, mu_fit, umpr_select, SelectionResult};
use crate::sieve::{HierarchySpec, Link, PolynomialClass, PredictionRule};
use crate::simulation::rgeu_experiment;
use crate::utility::{empirical_utility, Dataset};

pub use config::{describe_keys, experiment_echo, ConfigMap, KEYS, THREADS_ENV};
pub use data::{read_dataset, write_dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "umpr", version, about = "Utility-maximizing binary prediction with penalized model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one polynomial class by maximum utility, or score a given rule.
    Fit(Common),
    /// Select a class from a nested hierarchy.
    Select(Common),
    /// Run a replicated out-of-sample experiment and emit a TSV report.
    Experiment(Common),
    /// Compute one complexity penalty with diagnostics.
    Penalty(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; same as `data=PATH`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report destination; same as `out=PATH`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` overrides.
    settings: Vec<String>,
}

/// A failure tagged with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    error: Error,
}

fn config_err(error: Error) -> Failure {
    Failure { code: EXIT_CONFIG, error }
}

fn runtime_err(error: Error) -> Failure {
    Failure { code: EXIT_RUNTIME, error }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(c) => settings(c).and_then(|m| cmd_fit(&m, out, err)),
        Command::Select(c) => settings(c).and_then(|m| cmd_select(&m, out, err)),
        Command::Experiment(c) => settings(c).and_then(|m| cmd_experiment(&m, out, err)),
        Command::Penalty(c) => settings(c).and_then(|m| cmd_penalty(&m, out, err)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.error);
            f.code
        }
    }
}

fn settings(c: &Common) -> Outcome<ConfigMap> {
    let mut map = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(Error::Config(format!("{}: {e}", path.display()))))?;
            ConfigMap::parse(&text).map_err(|e| config_err(Error::Config(format!("{}: {e}", path.display()))))?
        }
        None => ConfigMap::default(),
    };
    for s in &c.settings {
        map.apply(s).map_err(config_err)?;
    }
    if let Some(p) = &c.data {
        map.set("data", &p.to_string_lossy()).map_err(config_err)?;
    }
    if let Some(p) = &c.out {
        map.set("out", &p.to_string_lossy()).map_err(config_err)?;
    }
    Ok(map)
}

fn load_data(map: &ConfigMap) -> Outcome<Dataset> {
    let path = map.raw("data").ok_or_else(|| config_err(Error::Config("key 'data' is required".into())))?;
    let file = File::open(path).map_err(|e| config_err(Error::Config(format!("{path}: {e}"))))?;
    read_dataset(BufReader::new(file)).map_err(|e| config_err(Error::Config(format!("{path}: {e}"))))
}

/// The configured seed, or a fresh one reported on `err`.
fn seed(map: &ConfigMap, err: &mut dyn Write) -> Outcome<u64> {
    match map.seed().map_err(config_err)? {
        Some(s) => Ok(s),
        None => {
            let s = rand::rng().random::<u64>();
            let _ = writeln!(err, "seed = {s}");
            Ok(s)
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    runtime_err(Error::Io(e))
}

fn cmd_fit(map: &ConfigMap, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<()> {
    let data = load_data(map)?;
    let (pref, _) = map.preference().map_err(config_err)?;
    pref.check_dataset(&data).map_err(config_err)?;
    let rule = match map.raw("rule") {
        Some(record) => {
            let rule = PredictionRule::from_record(record).map_err(config_err)?;
            if rule.class().dim() != data.dim() {
                return Err(config_err(Error::DimensionMismatch { expected: data.dim(), got: rule.class().dim() }));
            }
            rule
        }
        None => {
            let class = PolynomialClass::new(data.dim(), map.require("degree").map_err(config_err)?, map.link().map_err(config_err)?)
                .map_err(config_err)?;
            let cfg = map.optimizer().map_err(config_err)?;
            let mut rng = stream(seed(map, err)?);
            mu_fit(&class, &data, &pref, &cfg, &mut rng).map_err(runtime_err)?.rule
        }
    };
    let value = empirical_utility(&rule, &data, &pref).map_err(runtime_err)?.get();
    writeln!(out, "rule = {}", rule.to_record()).map_err(io)?;
    writeln!(out, "S_n = {value}").map_err(io)?;
    Ok(())
}

fn write_selection(out: &mut dyn Write, sel: &SelectionResult, score_name: &str) -> std::io::Result<()> {
    writeln!(out, "k\tutility\tpenalty\t{score_name}\tchosen")?;
    for row in &sel.per_k {
        let pen = row.penalty.map_or_else(|| "-".to_string(), |p| p.to_string());
        let mark = if row.k == sel.chosen_k { "*" } else { "" };
        writeln!(out, "{}\t{}\t{}\t{}\t{}", row.k, row.utility, pen, row.score, mark)?;
    }
    writeln!(out, "chosen_k = {}", sel.chosen_k)?;
    writeln!(out, "rule = {}", sel.rule.to_record())
}

fn cmd_select(map: &ConfigMap, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<()> {
    let data = load_data(map)?;
    let (pref, bound) = map.preference().map_err(config_err)?;
    pref.check_dataset(&data).map_err(config_err)?;
    let depth: usize = map.require("hierarchy.K").map_err(config_err)?;
    let hierarchy = HierarchySpec::polynomial(data.dim(), depth, Link::Identity).map_err(config_err)?;
    let cfg = map.optimizer().map_err(config_err)?;
    let method = map.raw("method").unwrap_or("umpr").to_string();
    let folds: usize = map.require("cv.folds").map_err(config_err)?;
    let spec = map.penalty_spec().map_err(config_err)?;
    let grid: Vec<f64> = map.list("alpha.grid").map_err(config_err)?;
    if !matches!(method.as_str(), "umpr" | "cv-k" | "cv-alpha") {
        return Err(config_err(Error::Config(format!("unknown method '{method}', expected umpr, cv-k or cv-alpha"))));
    }
    let mut rng = stream(seed(map, err)?);
    writeln!(out, "method = {method}").map_err(io)?;
    match method.as_str() {
        "cv-k" => {
            writeln!(out, "folds = {folds}").map_err(io)?;
            let sel = cv_select_k(&hierarchy, &data, &pref, folds, &cfg, &mut rng).map_err(runtime_err)?;
            write_selection(out, &sel, "cv").map_err(io)?;
        }
        "cv-alpha" => {
            let choice = cv_select_alpha(&grid, &hierarchy, &data, &pref, spec.kind, spec.m, folds, bound, &cfg, &mut rng)
                .map_err(runtime_err)?;
            writeln!(out, "penalty = {}", spec.kind).map_err(io)?;
            for (a, s) in &choice.scores {
                writeln!(out, "cv_alpha[{a}] = {s}").map_err(io)?;
            }
            writeln!(out, "alpha = {}", choice.alpha).map_err(io)?;
            let spec = crate::penalties::PenaltySpec { alpha: choice.alpha, technical_term: true, ..spec };
            let sel = umpr_select(&hierarchy, &data, &pref, &spec, bound, &cfg, &mut rng).map_err(runtime_err)?;
            write_selection(out, &sel, "score").map_err(io)?;
        }
        _ => {
            writeln!(out, "penalty = {}", spec.kind).map_err(io)?;
            writeln!(out, "alpha = {}", spec.alpha).map_err(io)?;
            writeln!(out, "technical_term = {}", if spec.technical_term { "on" } else { "off" }).map_err(io)?;
            let sel = umpr_select(&hierarchy, &data, &pref, &spec, bound, &cfg, &mut rng).map_err(runtime_err)?;
            write_selection(out, &sel, "score").map_err(io)?;
        }
    }
    Ok(())
}

fn cmd_penalty(map: &ConfigMap, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<()> {
    let data = load_data(map)?;
    let (pref, bound) = map.preference().map_err(config_err)?;
    pref.check_dataset(&data).map_err(config_err)?;
    let class = PolynomialClass::new(data.dim(), map.require("degree").map_err(config_err)?, map.link().map_err(config_err)?)
        .map_err(config_err)?;
    let spec = map.penalty_spec().map_err(config_err)?;
    let cfg = map.optimizer().map_err(config_err)?;
    let mut rng = stream(seed(map, err)?);
    let value = penalty(&class, &data, &pref, &spec, bound, &cfg, &mut rng).map_err(runtime_err)?;
    let draws: Vec<String> = value.diagnostics.iter().map(|v| v.to_string()).collect();
    let text = format!(
        "penalty = {}\nvalue = {}\ncomplexity = {}\ntechnical_coefficient = {}\nvc_dim = {}\nn = {}\nbound = {}\ninner_maxima = {}\n",
        value.kind,
        value.value,
        value.complexity,
        value.technical_coefficient,
        value.vc_dim,
        value.n,
        bound,
        draws.join(",")
    );
    out.write_all(text.as_bytes()).map_err(io)
}

fn cmd_experiment(map: &ConfigMap, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<()> {
    let mut map = map.clone();
    if !map.is_set("seed") {
        let s = seed(&map, err)?;
        map.set("seed", &s.to_string()).map_err(config_err)?;
    }
    let cfg = map.experiment().map_err(config_err)?;
    let report = rgeu_experiment(&cfg).map_err(runtime_err)?;
    let tsv = report.to_tsv(&experiment_echo(&cfg));
    match map.raw("out") {
        Some(path) => std::fs::write(path, tsv).map_err(io)?,
        None => out.write_all(tsv.as_bytes()).map_err(io)?,
    }
    let failed: usize = report.rows.iter().map(|r| r.failures.len()).sum();
    let _ = writeln!(err, "{} replications in {:.1} s, {failed} estimator failures", cfg.replications, report.elapsed.as_secs_f64());
    Ok(())
}
