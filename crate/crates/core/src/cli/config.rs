//! Flat `key = value` settings with a fixed key registry.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::comparators::{LassoConfig, SvmConfig};
use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::penalties::{PenaltyKind, PenaltySpec};
use crate::simulation::{Dgp, Estimator, ExperimentConfig};
use crate::sieve::Link;
use crate::utility::{utility_bound_from_ranges, CatalogPreference, Preference};

pub const THREADS_ENV: &str = "UMPR_THREADS";

/// Every accepted key with its default and meaning. An empty default means
/// the key is unset unless given.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "", "master seed; drawn from system entropy and reported when absent"),
    ("threads", "", "worker threads for experiments; falls back to UMPR_THREADS, then all cores"),
    ("data", "", "dataset CSV with header y,x1,...,xd"),
    ("out", "", "experiment report path; standard output when unset"),
    ("preference", "constant", "constant, or a catalog preference 1-4"),
    ("weight", "20", "b for the constant preference"),
    ("cutoff", "0.5", "c for the constant preference"),
    ("bound", "", "utility bound M; the tightest bound of the preference when unset"),
    ("degree", "3", "polynomial degree for fit and penalty"),
    ("link", "identity", "identity or logistic, for fit and penalty"),
    ("rule", "", "fit: score this rule record instead of fitting one"),
    ("hierarchy.K", "3", "number of nested polynomial classes"),
    ("method", "umpr", "select: umpr, cv-k or cv-alpha"),
    ("penalty", "vc", "vc, md, smd, rc or bc"),
    ("alpha", "1", "technical-term exponent"),
    ("technical_term", "on", "on or off"),
    ("m", "10", "draws for the smd, rc and bc penalties"),
    ("cv.folds", "10", "cross-validation folds"),
    ("alpha.grid", "1,0.5,0.1,0.05", "candidate alphas for cv-alpha"),
    ("opt.restarts", "20", "annealing restarts"),
    ("opt.iterations", "3000", "proposals per restart"),
    ("opt.temperature", "1", "initial temperature"),
    ("opt.cooling", "0.995", "geometric cooling factor"),
    ("opt.step", "0.5", "proposal standard deviation"),
    ("dgp", "1", "experiment design, 1 or 2"),
    ("n", "500", "experiment training size"),
    ("test_size", "5000", "experiment test size"),
    ("replications", "500", "experiment replications"),
    ("estimators", "oracle,mu,umpr-vc@1,umpr-md@1", "utility-based estimators; mu expands to mu1..mu<K>"),
    ("comparators", "ml", "likelihood and margin estimators: ml, aic, bic, lasso, svm"),
    ("lasso.grid.size", "50", "lasso penalty grid size"),
    ("lasso.ratio", "0.0001", "smallest over largest lasso penalty"),
    ("svm.iters", "50000", "svm stochastic subgradient steps"),
    ("svm.step", "0.1", "svm step constant c in c/sqrt(t)"),
    ("svm.grid.size", "20", "svm penalty grid size"),
];

/// Keys echoed into an experiment report; together they determine it.
const EXPERIMENT_KEYS: &[&str] = &[
    "dgp",
    "preference",
    "n",
    "test_size",
    "replications",
    "hierarchy.K",
    "estimators",
    "m",
    "cv.folds",
    "alpha.grid",
    "opt.restarts",
    "opt.iterations",
    "opt.temperature",
    "opt.cooling",
    "opt.step",
    "lasso.grid.size",
    "lasso.ratio",
    "svm.iters",
    "svm.step",
    "svm.grid.size",
    "seed",
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d).filter(|d| !d.is_empty())
}

/// Settings in effect: explicit values over registry defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut map = ConfigMap::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            map.set(k.trim(), v.trim()).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, setting: &str) -> Result<()> {
        let (k, v) = setting
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{setting}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(known(key), "{key} is not registered");
        self.values.get(key).map(String::as_str).or_else(|| default_of(key))
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config(format!("key '{key}' is required")))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key).map(str::to_ascii_lowercase).as_deref() {
            Some("on" | "true" | "yes" | "1") => Ok(true),
            Some("off" | "false" | "no" | "0") => Ok(false),
            other => Err(Error::Config(format!("key '{key}': expected on or off, got {other:?}"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.raw(key)
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Config(format!("key '{key}': cannot parse '{s}'"))))
            .collect()
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        self.get("seed")
    }

    pub fn threads(&self) -> Result<usize> {
        if let Some(t) = self.get::<usize>("threads")? {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}: cannot parse '{v}'"))),
            Err(_) => Ok(0),
        }
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            restarts: self.require("opt.restarts")?,
            iterations: self.require("opt.iterations")?,
            initial_temperature: self.require("opt.temperature")?,
            cooling: self.require("opt.cooling")?,
            step: self.require("opt.step")?,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// The preference and its bound `M`.
    pub fn preference(&self) -> Result<(Preference, f64)> {
        let name = self.raw("preference").unwrap_or("constant");
        let pref = if name == "constant" {
            let (b, c): (f64, f64) = (self.require("weight")?, self.require("cutoff")?);
            utility_bound_from_ranges(b, c, c).map_err(|e| Error::Config(e.to_string()))?;
            Preference::constant(b, c)?
        } else {
            Preference::catalog(self.catalog()?)
        };
        let bound = match self.get::<f64>("bound")? {
            Some(m) if m.is_finite() && m > 0.0 => m,
            Some(m) => return Err(Error::Config(format!("bound must be positive, got {m}"))),
            None => pref.bound(),
        };
        Ok((pref, bound))
    }

    fn catalog(&self) -> Result<CatalogPreference> {
        let name = self.raw("preference").unwrap_or("");
        name.parse::<u32>()
            .ok()
            .and_then(CatalogPreference::from_id)
            .ok_or_else(|| Error::Config(format!("unknown preference '{name}', expected constant or 1-4")))
    }

    pub fn link(&self) -> Result<Link> {
        self.raw("link").unwrap_or("identity").parse().map_err(|e: Error| Error::Config(e.to_string()))
    }

    pub fn penalty_spec(&self) -> Result<PenaltySpec> {
        let kind: PenaltyKind = self.raw("penalty").unwrap_or("vc").parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        PenaltySpec::new(kind, self.require("alpha")?, self.require("m")?, self.flag("technical_term")?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// An experiment configuration; `seed` must already be set.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let dgp: Dgp = self.require("dgp")?;
        let depth: usize = self.require("hierarchy.K")?;
        let mut cfg = ExperimentConfig::new(dgp, self.catalog()?, self.require("n")?);
        cfg.test_size = self.require("test_size")?;
        cfg.replications = self.require("replications")?;
        cfg.depth = depth;
        cfg.estimators = Estimator::parse_list(self.raw("estimators").unwrap_or(""), depth)?;
        cfg.estimators.extend(Estimator::parse_list(self.raw("comparators").unwrap_or(""), depth)?);
        cfg.m = self.require("m")?;
        cfg.folds = self.require("cv.folds")?;
        cfg.alpha_grid = self.list("alpha.grid")?;
        cfg.optimizer = self.optimizer()?;
        cfg.lasso = LassoConfig {
            grid_size: self.require("lasso.grid.size")?,
            ratio: self.require("lasso.ratio")?,
            folds: cfg.folds,
            ..LassoConfig::default()
        };
        cfg.svm = SvmConfig {
            grid_size: self.require("svm.grid.size")?,
            iterations: self.require("svm.iters")?,
            step: self.require("svm.step")?,
            folds: cfg.folds,
            ..SvmConfig::default()
        };
        cfg.seed = self.require("seed")?;
        cfg.threads = self.threads()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `key = value` pairs that re-parse into `cfg` (thread count aside).
pub fn experiment_echo(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let join = |v: Vec<String>| v.join(",");
    let value = |key: &str| -> String {
        match key {
            "dgp" => cfg.dgp.to_string(),
            "preference" => cfg.preference.id().to_string(),
            "n" => cfg.n.to_string(),
            "test_size" => cfg.test_size.to_string(),
            "replications" => cfg.replications.to_string(),
            "hierarchy.K" => cfg.depth.to_string(),
            "estimators" => join(cfg.estimators.iter().map(|e| e.to_string()).collect()),
            "m" => cfg.m.to_string(),
            "cv.folds" => cfg.folds.to_string(),
            "alpha.grid" => join(cfg.alpha_grid.iter().map(|a| a.to_string()).collect()),
            "opt.restarts" => cfg.optimizer.restarts.to_string(),
            "opt.iterations" => cfg.optimizer.iterations.to_string(),
            "opt.temperature" => cfg.optimizer.initial_temperature.to_string(),
            "opt.cooling" => cfg.optimizer.cooling.to_string(),
            "opt.step" => cfg.optimizer.step.to_string(),
            "lasso.grid.size" => cfg.lasso.grid_size.to_string(),
            "lasso.ratio" => cfg.lasso.ratio.to_string(),
            "svm.iters" => cfg.svm.iterations.to_string(),
            "svm.step" => cfg.svm.step.to_string(),
            "svm.grid.size" => cfg.svm.grid_size.to_string(),
            "seed" => cfg.seed.to_string(),
            _ => unreachable!("{key} is not an experiment key"),
        }
    };
    let mut out: Vec<(String, String)> = EXPERIMENT_KEYS.iter().map(|k| (k.to_string(), value(k))).collect();
    // the roster is complete in `estimators`
    out.push(("comparators".into(), String::new()));
    out
}

/// The registry as `key = default  # meaning` lines.
pub fn describe_keys() -> String {
    let mut s = String::new();
    for (k, d, what) in KEYS {
        let _ = writeln!(s, "{k} = {d}  # {what}");
    }
    s
}
