use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{oracle_utility, Dgp};
use crate::comparators::{l1_svm, lasso_logit, logit_mle, LassoConfig, LogitFit, SvmConfig};
use crate::comparators::InformationCriterion;
use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, ScoreProblem};
use crate::penalties::{DataPenalty, PenaltyKind, PenaltySpec, PenaltyValue};
use crate::rng::SeedPath;
use crate::selection::{cv_select_alpha, cv_select_k, select_penalized, MuFit};
use crate::sieve::{HierarchySpec, Link, PredictionRule};
use crate::utility::{empirical_utility, CatalogPreference, Dataset, Preference};

pub const DEFAULT_ALPHA_GRID: [f64; 4] = [1.0, 0.5, 0.1, 0.05];

/// How the technical term enters a UMPR penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Technical {
    Off,
    Alpha(f64),
    /// `alpha` picked from the grid by cross-validation.
    CrossValidated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// `sign(p* - c)`; its ratio is 1 by construction.
    Oracle,
    /// Logit maximum likelihood in the `k`-th class.
    Ml(usize),
    /// Maximum utility in the `k`-th class.
    Mu(usize),
    Umpr { kind: PenaltyKind, technical: Technical },
    CvK,
    Aic,
    Bic,
    Lasso,
    Svm,
}

impl Estimator {
    /// Expands `ml` and `mu` into one entry per class.
    pub fn parse_list(list: &str, depth: usize) -> Result<Vec<Estimator>> {
        let mut out = Vec::new();
        for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "ml" => out.extend((1..=depth).map(Estimator::Ml)),
                "mu" => out.extend((1..=depth).map(Estimator::Mu)),
                _ => out.push(token.parse()?),
            }
        }
        Ok(out)
    }

    /// The class index this estimator reports, when it has one.
    fn selects(self) -> bool {
        !matches!(self, Estimator::Oracle | Estimator::Lasso | Estimator::Svm)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Oracle => write!(f, "oracle"),
            Estimator::Ml(k) => write!(f, "ml{k}"),
            Estimator::Mu(k) => write!(f, "mu{k}"),
            Estimator::Umpr { kind, technical } => {
                write!(f, "umpr-{kind}")?;
                match technical {
                    Technical::Off => Ok(()),
                    Technical::Alpha(a) => write!(f, "@{a}"),
                    Technical::CrossValidated => write!(f, "@cv"),
                }
            }
            Estimator::CvK => write!(f, "cv-k"),
            Estimator::Aic => write!(f, "aic"),
            Estimator::Bic => write!(f, "bic"),
            Estimator::Lasso => write!(f, "lasso"),
            Estimator::Svm => write!(f, "svm"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Estimator> {
        let bad = || Error::Config(format!("unknown estimator '{s}'"));
        let t = s.trim();
        Ok(match t {
            "oracle" => Estimator::Oracle,
            "cv-k" => Estimator::CvK,
            "aic" => Estimator::Aic,
            "bic" => Estimator::Bic,
            "lasso" => Estimator::Lasso,
            "svm" => Estimator::Svm,
            _ => {
                if let Some(rest) = t.strip_prefix("umpr-") {
                    let (kind, technical) = match rest.split_once('@') {
                        None => (rest, Technical::Off),
                        Some((kind, "cv")) => (kind, Technical::CrossValidated),
                        Some((kind, a)) => {
                            let alpha: f64 = a.parse().map_err(|_| bad())?;
                            if !(alpha.is_finite() && alpha >= 0.0) {
                                return Err(bad());
                            }
                            (kind, Technical::Alpha(alpha))
                        }
                    };
                    Estimator::Umpr { kind: kind.parse().map_err(|_| bad())?, technical }
                } else if let Some(k) = t.strip_prefix("ml") {
                    Estimator::Ml(k.parse().ok().filter(|k| *k >= 1).ok_or_else(bad)?)
                } else if let Some(k) = t.strip_prefix("mu") {
                    Estimator::Mu(k.parse().ok().filter(|k| *k >= 1).ok_or_else(bad)?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub preference: CatalogPreference,
    /// Training size.
    pub n: usize,
    /// Test size `l`.
    pub test_size: usize,
    pub replications: usize,
    /// Number of polynomial classes, degrees `1..=depth`.
    pub depth: usize,
    pub estimators: Vec<Estimator>,
    /// Draws for the simulated penalties.
    pub m: usize,
    pub folds: usize,
    pub alpha_grid: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub lasso: LassoConfig,
    pub svm: SvmConfig,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(dgp: Dgp, preference: CatalogPreference, n: usize) -> Self {
        ExperimentConfig {
            dgp,
            preference,
            n,
            test_size: 5000,
            replications: 500,
            depth: 3,
            estimators: Vec::new(),
            m: 10,
            folds: 10,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            optimizer: OptimizerConfig::default(),
            lasso: LassoConfig::default(),
            svm: SvmConfig::default(),
            seed: 0,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !self.dgp.supports(self.preference) {
            return cfg(format!(
                "preference {} does not belong to dgp {} (use 1-2 with dgp 1, 3-4 with dgp 2)",
                self.preference.id(),
                self.dgp
            ));
        }
        if self.n == 0 || self.test_size == 0 || self.replications == 0 {
            return cfg("n, test size and replications must be positive".into());
        }
        if self.depth == 0 {
            return cfg("depth must be positive".into());
        }
        if self.estimators.is_empty() {
            return cfg("no estimators requested".into());
        }
        for e in &self.estimators {
            match *e {
                Estimator::Ml(k) | Estimator::Mu(k) if k > self.depth => {
                    return cfg(format!("estimator {e} is beyond depth {}", self.depth));
                }
                Estimator::Umpr { kind, technical } => {
                    PenaltySpec::new(kind, 1.0, self.m, true).map_err(|err| Error::Config(err.to_string()))?;
                    if technical == Technical::CrossValidated && self.alpha_grid.is_empty() {
                        return cfg("alpha grid is empty".into());
                    }
                }
                _ => {}
            }
        }
        if self.alpha_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return cfg("alpha grid values must be nonnegative".into());
        }
        let needs_folds = self.estimators.iter().any(|e| {
            matches!(e, Estimator::CvK | Estimator::Lasso | Estimator::Svm | Estimator::Umpr { technical: Technical::CrossValidated, .. })
        });
        if needs_folds && (self.folds < 2 || self.folds > self.n) {
            return cfg(format!("cv folds must lie in 2..={}", self.n));
        }
        self.optimizer.validate().map_err(|err| Error::Config(err.to_string()))
    }
}

/// One row of the report.
#[derive(Debug, Clone)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    /// Mean of the per-replication utility ratios, in percent.
    pub rgeu_pct: f64,
    /// Monte Carlo standard error of `rgeu_pct`.
    pub se_pct: f64,
    pub successes: usize,
    /// Percent of successful replications choosing each class.
    pub freq_pct: Option<Vec<f64>>,
    /// Replication index and message of every failure.
    pub failures: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<EstimatorSummary>,
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub fn row(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// The tab-separated table preceded by `# key = value` header lines.
    /// Nothing timing- or thread-dependent is written.
    pub fn to_tsv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in header {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str("estimator\trgeu_pct\tse_pct");
        for k in 1..=self.config.depth {
            let _ = write!(out, "\tfreq_k{k}");
        }
        out.push_str("\tfailures\n");
        for r in &self.rows {
            let _ = write!(out, "{}\t{:.4}\t{:.4}", r.estimator, r.rgeu_pct, r.se_pct);
            for k in 0..self.config.depth {
                match &r.freq_pct {
                    Some(f) => {
                        let _ = write!(out, "\t{:.1}", f[k]);
                    }
                    None => out.push_str("\t-"),
                }
            }
            let _ = writeln!(out, "\t{}", r.failures.len());
        }
        for r in &self.rows {
            for (j, msg) in &r.failures {
                let _ = writeln!(out, "# failure {} replication {j}: {msg}", r.estimator);
            }
        }
        out
    }
}

// Stream labels under each replication's seed.
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_MU: u64 = 100;
const STREAM_PENALTY: u64 = 200;
const STREAM_CV_K: u64 = 300;
const STREAM_CV_ALPHA: u64 = 400;
const STREAM_LASSO: u64 = 500;
const STREAM_SVM: u64 = 501;

type Outcome = std::result::Result<(f64, Option<usize>), String>;

fn kind_index(kind: PenaltyKind) -> u64 {
    PenaltyKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64
}

/// Per-replication fits shared across estimators.
struct Cache<'a> {
    cfg: &'a ExperimentConfig,
    pref: &'a Preference,
    path: SeedPath,
    train: &'a Dataset,
    mu_hierarchy: HierarchySpec,
    ml_hierarchy: HierarchySpec,
    problems: Option<Vec<ScoreProblem<'a>>>,
    mu: Vec<Option<std::result::Result<MuFit, String>>>,
    ml: Vec<Option<std::result::Result<LogitFit, String>>>,
    penalties: Vec<(PenaltyKind, std::result::Result<Vec<PenaltyValue>, String>)>,
}

impl<'a> Cache<'a> {
    fn problems(&mut self) -> std::result::Result<&[ScoreProblem<'a>], String> {
        if self.problems.is_none() {
            let built = self
                .mu_hierarchy
                .classes()
                .iter()
                .map(|c| ScoreProblem::new(self.train, self.pref, c))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            self.problems = Some(built);
        }
        Ok(self.problems.as_deref().unwrap_or_default())
    }

    fn mu(&mut self, k: usize) -> std::result::Result<MuFit, String> {
        if self.mu[k - 1].is_none() {
            let cfg = self.cfg;
            let mut rng = self.path.child(STREAM_MU + k as u64).rng();
            let fit = self.problems().and_then(|p| {
                let problem = &p[k - 1];
                problem
                    .maximize(&vec![1.0; problem.len()], &cfg.optimizer, &mut rng)
                    .map(|m| MuFit { rule: m.rule, utility: m.value })
                    .map_err(|e| e.to_string())
            });
            self.mu[k - 1] = Some(fit);
        }
        self.mu[k - 1].clone().expect("filled above")
    }

    fn all_mu(&mut self) -> std::result::Result<Vec<MuFit>, String> {
        (1..=self.cfg.depth).map(|k| self.mu(k)).collect()
    }

    fn ml(&mut self, k: usize) -> std::result::Result<LogitFit, String> {
        if self.ml[k - 1].is_none() {
            let fit = logit_mle(&self.ml_hierarchy.classes()[k - 1], self.train).map_err(|e| e.to_string());
            self.ml[k - 1] = Some(fit);
        }
        self.ml[k - 1].clone().expect("filled above")
    }

    fn penalties(&mut self, kind: PenaltyKind) -> std::result::Result<Vec<PenaltyValue>, String> {
        if let Some((_, v)) = self.penalties.iter().find(|(k, _)| *k == kind) {
            return v.clone();
        }
        let (cfg, pref) = (self.cfg, self.pref);
        let mut rng = self.path.child(STREAM_PENALTY + kind_index(kind)).rng();
        let value = PenaltySpec::new(kind, 1.0, cfg.m, true).map_err(|e| e.to_string()).and_then(|spec| {
            self.problems()?
                .iter()
                .map(|problem| {
                    DataPenalty { problem, bound: pref.bound(), cfg: &cfg.optimizer }
                        .compute(&spec, &mut rng)
                        .map_err(|e| e.to_string())
                })
                .collect::<std::result::Result<Vec<_>, String>>()
        });
        self.penalties.push((kind, value.clone()));
        value
    }

    /// The selected rule and class index, or the fixed class for `Mu`/`Ml`.
    fn fit(&mut self, est: Estimator) -> std::result::Result<(PredictionRule, Option<usize>), String> {
        let (cfg, pref, train) = (self.cfg, self.pref, self.train);
        let err = |e: Error| e.to_string();
        match est {
            Estimator::Oracle => unreachable!("the oracle is scored directly"),
            Estimator::Mu(k) => Ok((self.mu(k)?.rule, Some(k))),
            Estimator::Ml(k) => Ok((self.ml(k)?.rule, Some(k))),
            Estimator::Umpr { kind, technical } => {
                let fits = self.all_mu()?;
                let pens = self.penalties(kind)?;
                let (alpha, on) = match technical {
                    Technical::Off => (1.0, false),
                    Technical::Alpha(a) => (a, true),
                    Technical::CrossValidated => {
                        let mut rng = self.path.child(STREAM_CV_ALPHA + kind_index(kind)).rng();
                        let choice = cv_select_alpha(
                            &cfg.alpha_grid,
                            &self.mu_hierarchy,
                            train,
                            pref,
                            kind,
                            cfg.m,
                            cfg.folds,
                            pref.bound(),
                            &cfg.optimizer,
                            &mut rng,
                        )
                        .map_err(err)?;
                        (choice.alpha, true)
                    }
                };
                let values = pens.iter().map(|p| p.at(alpha, on)).collect::<Result<Vec<_>>>().map_err(err)?;
                let sel = select_penalized(&fits, &values).map_err(err)?;
                Ok((sel.rule, Some(sel.chosen_k)))
            }
            Estimator::CvK => {
                let mut rng = self.path.child(STREAM_CV_K).rng();
                let sel = cv_select_k(&self.mu_hierarchy, train, pref, cfg.folds, &cfg.optimizer, &mut rng).map_err(err)?;
                Ok((sel.rule, Some(sel.chosen_k)))
            }
            Estimator::Aic | Estimator::Bic => {
                let fits = (1..=cfg.depth).map(|k| self.ml(k)).collect::<std::result::Result<Vec<_>, _>>()?;
                let crit = if est == Estimator::Aic { InformationCriterion::Aic } else { InformationCriterion::Bic };
                let sel = crate::comparators::select_from_fits(&fits, train.len(), crit).map_err(err)?;
                Ok((sel.rule, Some(sel.chosen_k)))
            }
            Estimator::Lasso => {
                let fit = lasso_logit(train, cfg.depth, &cfg.lasso, &mut self.path.child(STREAM_LASSO).rng()).map_err(err)?;
                Ok((fit.rule, None))
            }
            Estimator::Svm => {
                let fit = l1_svm(train, cfg.depth, &cfg.svm, &mut self.path.child(STREAM_SVM).rng()).map_err(err)?;
                Ok((fit.rule, None))
            }
        }
    }
}

fn replicate(cfg: &ExperimentConfig, pref: &Preference, j: usize) -> Vec<Outcome> {
    let path = SeedPath::new(cfg.seed).child(j as u64);
    let everyone = |msg: String| vec![Err(msg); cfg.estimators.len()];
    let sample = |label: u64, size: usize| cfg.dgp.sample(size, &mut path.child(label).rng());
    let (train, test) = match (sample(STREAM_TRAIN, cfg.n), sample(STREAM_TEST, cfg.test_size)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return everyone(e.to_string()),
    };
    let denominator = match oracle_utility(cfg.dgp, pref, &test) {
        Ok(v) if v.get() > 0.0 => v.get(),
        Ok(v) => return everyone(format!("oracle test utility {} is not positive", v.get())),
        Err(e) => return everyone(e.to_string()),
    };
    let d = cfg.dgp.dim();
    let hierarchies = HierarchySpec::polynomial(d, cfg.depth, Link::Identity)
        .and_then(|mu| Ok((mu, HierarchySpec::polynomial(d, cfg.depth, Link::Logistic)?)));
    let (mu_hierarchy, ml_hierarchy) = match hierarchies {
        Ok(h) => h,
        Err(e) => return everyone(e.to_string()),
    };
    let mut cache = Cache {
        cfg,
        pref,
        path,
        train: &train,
        mu_hierarchy,
        ml_hierarchy,
        problems: None,
        mu: vec![None; cfg.depth],
        ml: vec![None; cfg.depth],
        penalties: Vec::new(),
    };
    cfg.estimators
        .iter()
        .map(|&est| {
            if est == Estimator::Oracle {
                return Ok((1.0, None));
            }
            let (rule, k) = cache.fit(est)?;
            let value = empirical_utility(&rule, &test, pref).map_err(|e| e.to_string())?.get();
            Ok((value / denominator, k))
        })
        .collect()
}

/// Runs every replication and reduces the ratios in replication order, so the
/// report does not depend on the thread count.
pub fn rgeu_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pref = Preference::catalog(cfg.preference);
    let start = Instant::now();
    let run = || (0..cfg.replications).into_par_iter().map(|j| replicate(cfg, &pref, j)).collect::<Vec<_>>();
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let rows = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let mut ratios = Vec::with_capacity(results.len());
            let mut counts = vec![0usize; cfg.depth];
            let mut failures = Vec::new();
            for (j, rep) in results.iter().enumerate() {
                match &rep[e] {
                    Ok((ratio, k)) => {
                        ratios.push(*ratio);
                        if let Some(k) = k {
                            counts[k - 1] += 1;
                        }
                    }
                    Err(msg) => failures.push((j, msg.clone())),
                }
            }
            let s = ratios.len();
            let mean = ratios.iter().sum::<f64>() / s as f64;
            let se = if s > 1 {
                (ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (s - 1) as f64 / s as f64).sqrt()
            } else {
                f64::NAN
            };
            let freq_pct = estimator
                .selects()
                .then(|| counts.iter().map(|&c| if s > 0 { 100.0 * c as f64 / s as f64 } else { f64::NAN }).collect());
            EstimatorSummary { estimator, rgeu_pct: 100.0 * mean, se_pct: 100.0 * se, successes: s, freq_pct, failures }
        })
        .collect();
    Ok(ExperimentReport { config: cfg.clone(), rows, elapsed: start.elapsed() })
}
