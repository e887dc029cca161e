//! Maximum-utility fits, complexity-penalized selection over a hierarchy and
//! the two cross-validation procedures.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, ScoreProblem};
use crate::penalties::{DataPenalty, PenaltyKind, PenaltySpec, PenaltyValue};
use crate::sieve::{HierarchySpec, PolynomialClass, PredictionRule};
use crate::utility::{empirical_utility, Dataset, Preference};

/// A maximum utility estimate `f_k` and its in-sample utility `S_n(f_k)`.
#[derive(Debug, Clone)]
pub struct MuFit {
    pub rule: PredictionRule,
    pub utility: f64,
}

/// Fits `argmax_{f in class} S_n(f)`.
pub fn mu_fit<R: Rng + ?Sized>(
    class: &PolynomialClass,
    data: &Dataset,
    pref: &Preference,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<MuFit> {
    let problem = ScoreProblem::new(data, pref, class)?;
    fit_on(&problem, cfg, rng)
}

fn fit_on<R: Rng + ?Sized>(problem: &ScoreProblem<'_>, cfg: &OptimizerConfig, rng: &mut R) -> Result<MuFit> {
    let m = problem.maximize(&vec![1.0; problem.len()], cfg, rng)?;
    Ok(MuFit { rule: m.rule, utility: m.value })
}

/// One row of a selection table. `k` counts from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KDiagnostics {
    pub k: usize,
    pub utility: f64,
    pub penalty: Option<f64>,
    /// The criterion maximized over `k`: `S_n(f_k) - C_n(k)` for penalized
    /// selection, `CV(k)` for cross-validation.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub chosen_k: usize,
    pub rule: PredictionRule,
    pub per_k: Vec<KDiagnostics>,
}

impl SelectionResult {
    pub fn chosen(&self) -> &KDiagnostics {
        &self.per_k[self.chosen_k - 1]
    }
}

/// Index of the largest score; the first one on ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks `argmax_k S_n(f_k) - C_n(k)` (smallest `k` on ties).
pub fn select_penalized(fits: &[MuFit], penalties: &[f64]) -> Result<SelectionResult> {
    if fits.is_empty() || fits.len() != penalties.len() {
        return Err(Error::invalid("need one penalty per fitted class"));
    }
    let per_k: Vec<KDiagnostics> = fits
        .iter()
        .zip(penalties)
        .enumerate()
        .map(|(i, (f, &p))| KDiagnostics { k: i + 1, utility: f.utility, penalty: Some(p), score: f.utility - p })
        .collect();
    let scores: Vec<f64> = per_k.iter().map(|d| d.score).collect();
    let i = argmax_first(&scores).ok_or_else(|| Error::Numerical("every penalized utility is NaN".into()))?;
    Ok(SelectionResult { chosen_k: i + 1, rule: fits[i].rule.clone(), per_k })
}

/// Fits every class and evaluates its penalty, in order `(fit_1, C_1, fit_2, C_2, ...)`
/// on one random stream.
pub fn umpr_candidates<R: Rng + ?Sized>(
    hierarchy: &HierarchySpec,
    data: &Dataset,
    pref: &Preference,
    spec: &PenaltySpec,
    bound: f64,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<Vec<(MuFit, PenaltyValue)>> {
    spec.validate()?;
    hierarchy
        .classes()
        .iter()
        .map(|class| {
            let problem = ScoreProblem::new(data, pref, class)?;
            let fit = fit_on(&problem, cfg, rng)?;
            let pen = DataPenalty { problem: &problem, bound, cfg }.compute(spec, rng)?;
            Ok((fit, pen))
        })
        .collect()
}

/// The utility-maximizing prediction rule: the fit maximizing
/// `S_n(f_k) - C_n(k; alpha)` over the hierarchy.
pub fn umpr_select<R: Rng + ?Sized>(
    hierarchy: &HierarchySpec,
    data: &Dataset,
    pref: &Preference,
    spec: &PenaltySpec,
    bound: f64,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<SelectionResult> {
    let cands = umpr_candidates(hierarchy, data, pref, spec, bound, cfg, rng)?;
    let (fits, pens): (Vec<MuFit>, Vec<f64>) = cands.into_iter().map(|(f, p)| (f, p.value)).unzip();
    select_penalized(&fits, &pens)
}

/// A random partition of `0..n` into `folds` blocks of a shuffled order;
/// block sizes differ by at most one. Each block is returned sorted.
pub fn fold_partition<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if n < folds {
        return Err(Error::invalid(format!("{folds} folds need at least {folds} observations, got {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for t in 0..folds {
        let len = base + usize::from(t < extra);
        let mut block = perm[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    Ok(out)
}

/// Training and validation sets for one fold; the training set keeps the
/// original observation order.
pub fn split_fold(data: &Dataset, fold: &[usize]) -> Result<(Dataset, Dataset)> {
    let mut held = vec![false; data.len()];
    for &i in fold {
        held[i] = true;
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| !held[i]).collect();
    if train.is_empty() || fold.is_empty() {
        return Err(Error::invalid("a fold leaves no training or validation observations"));
    }
    Ok((data.subset(&train)?, data.subset(fold)?))
}

/// `CV(k)` for every class given a partition; `fit(k, fold, train)` supplies
/// the rule fitted on the fold complement.
pub fn cv_scores<F>(data: &Dataset, pref: &Preference, depth: usize, folds: &[Vec<usize>], mut fit: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, usize, &Dataset) -> Result<PredictionRule>,
{
    let splits = folds.iter().map(|f| split_fold(data, f)).collect::<Result<Vec<_>>>()?;
    let mut scores = vec![0.0; depth];
    for (k, score) in scores.iter_mut().enumerate() {
        let mut total = 0.0;
        for (t, (train, valid)) in splits.iter().enumerate() {
            let rule = fit(k, t, train)?;
            total += empirical_utility(&rule, valid, pref)?.get();
        }
        *score = total / folds.len() as f64;
    }
    Ok(scores)
}

/// `T`-fold cross-validation over `k`, then a refit of the winner on all data.
pub fn cv_select_k<R: Rng + ?Sized>(
    hierarchy: &HierarchySpec,
    data: &Dataset,
    pref: &Preference,
    folds: usize,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<SelectionResult> {
    let partition = fold_partition(data.len(), folds, rng)?;
    let classes = hierarchy.classes();
    let scores = cv_scores(data, pref, classes.len(), &partition, |k, _, train| {
        Ok(mu_fit(&classes[k], train, pref, cfg, rng)?.rule)
    })?;
    let i = argmax_first(&scores).ok_or_else(|| Error::Numerical("every CV score is NaN".into()))?;
    let refit = mu_fit(&classes[i], data, pref, cfg, rng)?;
    let per_k = scores
        .iter()
        .enumerate()
        .map(|(k, &s)| KDiagnostics {
            k: k + 1,
            utility: if k == i { refit.utility } else { f64::NAN },
            penalty: None,
            score: s,
        })
        .collect();
    Ok(SelectionResult { chosen_k: i + 1, rule: refit.rule, per_k })
}

/// Held-out scores of every `alpha` in the grid, one per grid entry.
#[derive(Debug, Clone)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub scores: Vec<(f64, f64)>,
}

/// Picks `alpha` by `T`-fold cross-validation: on each fold complement the
/// UMPR (penalty at the complement's size, technical term on) is scored on
/// the held-out fold. Ties go to the largest `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn cv_select_alpha<R: Rng + ?Sized>(
    grid: &[f64],
    hierarchy: &HierarchySpec,
    data: &Dataset,
    pref: &Preference,
    kind: PenaltyKind,
    m: usize,
    folds: usize,
    bound: f64,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<AlphaChoice> {
    if grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    for &a in grid {
        PenaltySpec::new(kind, a, m, true)?;
    }
    if grid.len() == 1 {
        return Ok(AlphaChoice { alpha: grid[0], scores: vec![(grid[0], f64::NAN)] });
    }
    let partition = fold_partition(data.len(), folds, rng)?;
    let spec = PenaltySpec::new(kind, grid[0], m, true)?;
    let mut per_fold = Vec::with_capacity(folds);
    for fold in &partition {
        let (train, valid) = split_fold(data, fold)?;
        let cands = umpr_candidates(hierarchy, &train, pref, &spec, bound, cfg, rng)?;
        per_fold.push((cands, valid));
    }
    choose_alpha(grid, pref, &per_fold)
}

/// Alpha selection from candidates already computed on each fold complement.
pub fn choose_alpha(grid: &[f64], pref: &Preference, per_fold: &[(Vec<(MuFit, PenaltyValue)>, Dataset)]) -> Result<AlphaChoice> {
    let mut scores = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let mut total = 0.0;
        for (cands, valid) in per_fold {
            let fits: Vec<MuFit> = cands.iter().map(|(f, _)| f.clone()).collect();
            let pens = cands.iter().map(|(_, p)| p.at(alpha, true)).collect::<Result<Vec<_>>>()?;
            let sel = select_penalized(&fits, &pens)?;
            total += empirical_utility(&sel.rule, valid, pref)?.get();
        }
        scores.push((alpha, total / per_fold.len() as f64));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i].1 > scores[best].1 {
            best = i;
        }
    }
    Ok(AlphaChoice { alpha: grid[best], scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::exhaustive_oracle_1d;
    use crate::rng::stream;
    use crate::sieve::Link;
    use crate::utility::Label;
    use rand::Rng;

    fn toy(seed: u64, n: usize) -> Dataset {
        let mut rng = stream(seed);
        Dataset::from_rows(
            1,
            (0..n).map(|_| {
                let y = if rng.random::<bool>() { Label::Positive } else { Label::Negative };
                (y, vec![rng.random_range(-2.0..2.0)])
            }),
        )
        .unwrap()
    }

    #[test]
    fn separable_fit_reaches_full_utility() {
        let data = Dataset::from_rows(
            1,
            (0..20).map(|i| {
                let x = i as f64 / 5.0 - 2.0 + 0.1;
                (Label::sign_of(x), vec![x])
            }),
        )
        .unwrap();
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let c = PolynomialClass::new(1, 1, Link::Identity).unwrap();
        let fit = mu_fit(&c, &data, &pref, &OptimizerConfig::default(), &mut stream(1)).unwrap();
        assert_eq!(fit.utility, 20.0);
    }

    #[test]
    fn fit_matches_oracle_and_nests() {
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let cfg = OptimizerConfig::default();
        for seed in 0..5 {
            let data = toy(seed, 10);
            let f3 = mu_fit(&PolynomialClass::new(1, 3, Link::Identity).unwrap(), &data, &pref, &cfg, &mut stream(seed)).unwrap();
            let f1 = mu_fit(&PolynomialClass::new(1, 1, Link::Identity).unwrap(), &data, &pref, &cfg, &mut stream(seed)).unwrap();
            let o3 = exhaustive_oracle_1d(&data, 3, &[1.0; 10], &pref).unwrap();
            assert!((f3.utility - o3).abs() < 1e-9);
            assert!(f3.utility >= f1.utility);
        }
    }

    #[test]
    fn zero_penalty_picks_best_fit_smallest_k_on_ties() {
        let c = |k| PredictionRule::zeros(PolynomialClass::new(1, k, Link::Identity).unwrap());
        let fits = vec![
            MuFit { rule: c(1), utility: 3.0 },
            MuFit { rule: c(2), utility: 5.0 },
            MuFit { rule: c(3), utility: 5.0 },
        ];
        let sel = select_penalized(&fits, &[0.0; 3]).unwrap();
        assert_eq!(sel.chosen_k, 2);
        let scores: Vec<f64> = sel.per_k.iter().map(|d| d.score).collect();
        assert_eq!(sel.chosen().score, scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn huge_bound_picks_first_class() {
        let data = toy(3, 40);
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let h = HierarchySpec::polynomial(1, 3, Link::Identity).unwrap();
        let spec = PenaltySpec::new(PenaltyKind::Vc, 0.05, 1, true).unwrap();
        let cfg = OptimizerConfig { restarts: 2, iterations: 200, ..Default::default() };
        let sel = umpr_select(&h, &data, &pref, &spec, 5e6, &cfg, &mut stream(3)).unwrap();
        assert_eq!(sel.chosen_k, 1);
    }

    #[test]
    fn single_class_equals_mu_fit() {
        let data = toy(4, 30);
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let h = HierarchySpec::polynomial(1, 3, Link::Identity).unwrap().truncate(1).unwrap();
        let spec = PenaltySpec::new(PenaltyKind::Rc, 0.05, 3, false).unwrap();
        let cfg = OptimizerConfig { restarts: 4, iterations: 500, ..Default::default() };
        let sel = umpr_select(&h, &data, &pref, &spec, 5.0, &cfg, &mut stream(8)).unwrap();
        let fit = mu_fit(&h.classes()[0], &data, &pref, &cfg, &mut stream(8)).unwrap();
        assert_eq!(sel.rule, fit.rule);
        assert_eq!(sel.per_k[0].utility, fit.utility);
    }

    #[test]
    fn partition_covers_each_observation_once() {
        for (n, t) in [(10, 3), (7, 7), (100, 10), (11, 2)] {
            let p = fold_partition(n, t, &mut stream(n as u64)).unwrap();
            let mut all: Vec<usize> = p.iter().flatten().cloned().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = p.iter().map(Vec::len).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        assert!(fold_partition(3, 4, &mut stream(0)).is_err());
        assert!(fold_partition(3, 1, &mut stream(0)).is_err());
    }

    #[test]
    fn leave_one_out_by_hand() {
        let data = toy(17, 5);
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let h = HierarchySpec::polynomial(1, 2, Link::Identity).unwrap();
        let cfg = OptimizerConfig::default();
        let sel = cv_select_k(&h, &data, &pref, 5, &cfg, &mut stream(2)).unwrap();
        // replay the same stream: partition, then one fit per (k, fold)
        let mut r = stream(2);
        let partition = fold_partition(5, 5, &mut r).unwrap();
        for k in 0..2 {
            let mut total = 0.0;
            for fold in &partition {
                let (train, valid) = split_fold(&data, fold).unwrap();
                let f = mu_fit(&h.classes()[k], &train, &pref, &cfg, &mut r).unwrap();
                let o = exhaustive_oracle_1d(&train, k + 1, &[1.0; 4], &pref).unwrap();
                assert!((f.utility - o).abs() < 1e-9);
                total += empirical_utility(&f.rule, &valid, &pref).unwrap().get();
            }
            assert_eq!(sel.per_k[k].score, total / 5.0);
        }
    }

    #[test]
    fn duplicated_folds_reproduce_in_sample_utility() {
        let base = toy(23, 8);
        let mut rows: Vec<_> = base.iter().map(|o| (o.y, o.x.to_vec())).collect();
        rows.extend(rows.clone());
        let data = Dataset::from_rows(1, rows).unwrap();
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let folds = vec![(0..8).collect::<Vec<_>>(), (8..16).collect()];
        let class = PolynomialClass::new(1, 2, Link::Identity).unwrap();
        let cfg = OptimizerConfig::default();
        let mut r = stream(5);
        let scores = cv_scores(&data, &pref, 1, &folds, |_, _, train| Ok(mu_fit(&class, train, &pref, &cfg, &mut r)?.rule)).unwrap();
        let full = exhaustive_oracle_1d(&data, 2, &[1.0; 16], &pref).unwrap();
        assert!((scores[0] - full).abs() < 1e-9);
    }

    #[test]
    fn alpha_grid_rules() {
        let data = toy(31, 30);
        let pref = Preference::constant(20.0, 0.5).unwrap();
        let h = HierarchySpec::polynomial(1, 2, Link::Identity).unwrap();
        let cfg = OptimizerConfig { restarts: 2, iterations: 200, ..Default::default() };
        let one = cv_select_alpha(&[0.3], &h, &data, &pref, PenaltyKind::Vc, 1, 3, 5.0, &cfg, &mut stream(1)).unwrap();
        assert_eq!(one.alpha, 0.3);
        // with an enormous bound k = 1 always wins, so both alphas tie
        let tie = cv_select_alpha(&[0.05, 1.0], &h, &data, &pref, PenaltyKind::Vc, 1, 3, 5e6, &cfg, &mut stream(1)).unwrap();
        assert_eq!(tie.alpha, 1.0);
        assert!(cv_select_alpha(&[], &h, &data, &pref, PenaltyKind::Vc, 1, 3, 5.0, &cfg, &mut stream(1)).is_err());
    }
}
