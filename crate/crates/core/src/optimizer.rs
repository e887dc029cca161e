//! Simulated annealing for weighted empirical utility, and an exhaustive
//! 1-D oracle used to check it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sieve::{logit, Design, Link, PolynomialClass, PredictionRule};
use crate::utility::{Dataset, Label, Preference, UtilityTable};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub initial_temperature: f64,
    pub cooling: f64,
    pub step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { restarts: 20, iterations: 3000, initial_temperature: 1.0, cooling: 0.995, step: 0.5 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("optimizer needs at least one restart"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::invalid(format!("cooling factor {} is outside (0, 1)", self.cooling)));
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::invalid("initial temperature must be positive"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("proposal step must be positive"));
        }
        Ok(())
    }
}

/// `(1/n) sum_i w_i s(Y_i, X_i, f)` over a class.
#[derive(Debug, Clone)]
pub struct WeightedObjective<'a> {
    pub data: &'a Dataset,
    pub pref: &'a Preference,
    pub weights: Vec<f64>,
    pub class: &'a PolynomialClass,
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub rule: PredictionRule,
    pub value: f64,
}

/// `(1/n) sum_i w_i s_i(f)`, accumulated in index order.
pub fn weighted_utility(rule: &PredictionRule, data: &Dataset, pref: &Preference, weights: &[f64]) -> Result<f64> {
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: weights.len() });
    }
    if rule.class().dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: rule.class().dim(), got: data.dim() });
    }
    let table = UtilityTable::new(data, pref)?;
    Ok(canonical_value(rule, data, &table, weights))
}

fn canonical_value(rule: &PredictionRule, data: &Dataset, table: &UtilityTable, weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..data.len() {
        let decision = Label::sign_of(rule.evaluate_unchecked(data.row(i)) - table.cutoffs[i]);
        total += weights[i] * table.gains[i] * decision.value();
    }
    total / data.len() as f64
}

/// Data, preference and class prepared once so several weight vectors can be
/// maximized without rebuilding the design.
#[derive(Debug, Clone)]
pub struct ScoreProblem<'a> {
    data: &'a Dataset,
    class: PolynomialClass,
    table: UtilityTable,
    /// Design columns orthonormalized in the empirical inner product; the
    /// annealer moves in these coordinates.
    search: Design,
    /// Column-major `B x B` map from search coordinates to coefficients.
    to_coef: Vec<f64>,
    thresholds: Vec<f64>,
}

impl<'a> ScoreProblem<'a> {
    pub fn new(data: &'a Dataset, pref: &Preference, class: &PolynomialClass) -> Result<Self> {
        if class.basis_len() == 0 {
            return Err(Error::invalid("class basis is empty"));
        }
        let table = UtilityTable::new(data, pref)?;
        let design = class.design(data)?;
        let thresholds = match class.link() {
            Link::Identity => table.cutoffs.clone(),
            Link::Logistic => table.cutoffs.iter().map(|&c| logit(c)).collect(),
        };
        let (search, to_coef) = orthonormalize(&design);
        Ok(ScoreProblem { data, class: class.clone(), table, search, to_coef, thresholds })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn class(&self) -> &PolynomialClass {
        &self.class
    }

    pub fn value(&self, rule: &PredictionRule, weights: &[f64]) -> f64 {
        canonical_value(rule, self.data, &self.table, weights)
    }

    /// Rules deciding `+1` everywhere and `-1` everywhere.
    fn constant_rules(&self) -> [PredictionRule; 2] {
        let lo = self.thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.thresholds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let make = |intercept: f64| {
            let mut c = vec![0.0; self.class.basis_len()];
            c[0] = intercept;
            PredictionRule::new(self.class.clone(), c).expect("finite intercept")
        };
        [make(hi.max(0.0) + 1.0), make(lo.min(0.0) - 1.0)]
    }

    pub fn maximize<R: Rng + ?Sized>(&self, weights: &[f64], cfg: &OptimizerConfig, rng: &mut R) -> Result<Maximum> {
        cfg.validate()?;
        let n = self.len();
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { index: i, what: "weight" });
        }
        let v: Vec<f64> = weights.iter().zip(&self.table.gains).map(|(w, a)| w * a / n as f64).collect();

        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts + 2);
        for rule in self.constant_rules() {
            candidates.push(rule.coefficients().to_vec());
        }

        let b = self.search.b;
        // temperature is measured in units of the mean cost of flipping one decision
        let unit = {
            let u = 2.0 * v.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
            if u > 0.0 { u } else { 1.0 }
        };
        let active: Vec<usize> = (0..b).filter(|&j| self.search.col(j).iter().any(|&v| v != 0.0)).collect();
        let mut theta = vec![0.0; b];
        let mut margin = vec![0.0; n];
        let mut trial = vec![0.0; n];
        for _ in 0..cfg.restarts {
            for &j in &active {
                theta[j] = StandardNormal.sample(rng);
            }
            for _ in 0..INTERPOLATING_STARTS {
                let mut start = theta.clone();
                self.interpolating_start(&mut start, &active, rng);
                self.polish(&mut start, &active, &v, rng);
                candidates.push(self.coefficients(&start));
            }
            let lin = self.search.linear_predictor(&theta);
            for i in 0..n {
                margin[i] = lin[i] - self.thresholds[i];
            }
            let mut current: f64 = margin.iter().zip(&v).map(|(&g, &vi)| sgn(g) * vi).sum();
            let mut best = current;
            let mut best_theta = theta.clone();
            let mut temperature = cfg.initial_temperature;
            for _ in 0..cfg.iterations {
                let j = active[rng.random_range(0..active.len())];
                let z: f64 = StandardNormal.sample(rng);
                let delta = z * cfg.step;
                let col = self.search.col(j);
                let mut change = 0.0;
                for i in 0..n {
                    let g = margin[i] + delta * col[i];
                    trial[i] = g;
                    let (s_new, s_old) = (sgn(g), sgn(margin[i]));
                    if s_new != s_old {
                        change += v[i] * (s_new - s_old);
                    }
                }
                let accept = change >= 0.0 || rng.random::<f64>() < (change / (unit * temperature)).exp();
                if accept {
                    std::mem::swap(&mut margin, &mut trial);
                    theta[j] += delta;
                    current += change;
                    if current > best {
                        best = current;
                        best_theta.copy_from_slice(&theta);
                    }
                }
                temperature *= cfg.cooling;
            }
            self.polish(&mut best_theta, &active, &v, rng);
            candidates.push(self.coefficients(&best_theta));
        }

        let mut winner: Option<Maximum> = None;
        for coeffs in candidates {
            if coeffs.iter().any(|c| !c.is_finite()) {
                continue;
            }
            let rule = PredictionRule::new(self.class.clone(), coeffs)?;
            let value = self.value(&rule, weights);
            if winner.as_ref().is_none_or(|w| value > w.value) {
                winner = Some(Maximum { rule, value });
            }
        }
        winner.ok_or_else(|| Error::Numerical("annealer produced no finite candidate".into()))
    }
}

impl ScoreProblem<'_> {
    /// Exact line searches from the annealer's best point: along each active
    /// search axis and along as many random directions, repeated while the
    /// objective strictly improves.
    fn polish<R: Rng + ?Sized>(&self, theta: &mut [f64], active: &[usize], v: &[f64], rng: &mut R) -> f64 {
        let n = self.len();
        let b = self.search.b;
        let lin = self.search.linear_predictor(theta);
        let mut margin: Vec<f64> = lin.iter().zip(&self.thresholds).map(|(l, t)| l - t).collect();
        let mut dir = vec![0.0; b];
        let mut slope = vec![0.0; n];
        let mut breaks: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut total = 0.0;
        for _ in 0..MAX_POLISH_SWEEPS {
            let mut improved = false;
            for pass in 0..2 * active.len() {
                dir.iter_mut().for_each(|d| *d = 0.0);
                if pass < active.len() {
                    dir[active[pass]] = 1.0;
                } else {
                    for &j in active {
                        dir[j] = StandardNormal.sample(rng);
                    }
                }
                slope.iter_mut().for_each(|s| *s = 0.0);
                for (j, &d) in dir.iter().enumerate() {
                    if d != 0.0 {
                        slope.iter_mut().zip(self.search.col(j)).for_each(|(s, q)| *s += d * q);
                    }
                }
                if let Some((step, gain)) = best_step(&margin, &slope, v, &mut breaks) {
                    total += gain;
                    for j in 0..b {
                        theta[j] += step * dir[j];
                    }
                    margin.iter_mut().zip(&slope).for_each(|(g, s)| *g += step * s);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        total
    }
}

impl ScoreProblem<'_> {
    fn coefficients(&self, theta: &[f64]) -> Vec<f64> {
        let b = self.search.b;
        let mut beta = vec![0.0; b];
        for (l, &t) in theta.iter().enumerate() {
            for (bj, m) in beta.iter_mut().zip(&self.to_coef[l * b..(l + 1) * b]) {
                *bj += m * t;
            }
        }
        beta
    }

    /// Replaces `theta` by a rule whose margin is a small random `±eps` at
    /// `|active|` randomly chosen observations, so its decision boundary
    /// passes close to the data. Leaves `theta` alone if the system is singular.
    fn interpolating_start<R: Rng + ?Sized>(&self, theta: &mut [f64], active: &[usize], rng: &mut R) {
        let n = self.len();
        let p = active.len();
        if p > n {
            return;
        }
        let rows = rand::seq::index::sample(rng, n, p);
        let mut a = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for (r, i) in rows.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                a[(r, c)] = self.search.at(i, j);
            }
            let eps: f64 = 0.05 * rng.random::<f64>();
            rhs[r] = self.thresholds[i] + if rng.random::<bool>() { eps } else { -eps };
        }
        if let Some(sol) = a.lu().solve(&rhs) {
            if sol.iter().all(|x| x.is_finite()) {
                for (c, &j) in active.iter().enumerate() {
                    theta[j] = sol[c];
                }
            }
        }
    }
}

const INTERPOLATING_STARTS: usize = 5;
const MAX_POLISH_SWEEPS: usize = 5;

/// Maximizes `t -> sum_i v_i sgn(g_i + t s_i)` exactly. Returns the midpoint of
/// the best interval when it beats `t = 0` by a clear margin.
fn best_step(g: &[f64], s: &[f64], v: &[f64], breaks: &mut Vec<(f64, usize)>) -> Option<(f64, f64)> {
    breaks.clear();
    let mut value = 0.0;
    let mut current = 0.0;
    for i in 0..g.len() {
        current += v[i] * sgn(g[i]);
        if s[i] == 0.0 {
            value += v[i] * sgn(g[i]);
        } else {
            // far left every moving term has sign -sgn(s_i)
            value -= v[i] * sgn(s[i]);
            breaks.push((-g[i] / s[i], i));
        }
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = current.abs().max(v.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let tol = 1e-9 * scale.max(1e-300);
    let mut best = value;
    let mut best_at: Option<f64> = breaks.first().map(|f| f.0 - 1.0_f64.max(f.0.abs()));
    let mut k = 0;
    while k < breaks.len() {
        let at = breaks[k].0;
        while k < breaks.len() && breaks[k].0 == at {
            let i = breaks[k].1;
            value += 2.0 * v[i] * sgn(s[i]);
            k += 1;
        }
        if value > best + tol {
            best = value;
            best_at = Some(match breaks.get(k) {
                Some(next) => 0.5 * (at + next.0),
                None => at + 1.0_f64.max(at.abs()),
            });
        }
    }
    match best_at {
        Some(t) if best > current + tol && t.is_finite() => Some((t, best - current)),
        _ => None,
    }
}

/// Modified Gram-Schmidt (two passes) on the design columns, normalized to
/// unit root-mean-square. Columns dependent on earlier ones become zero.
fn orthonormalize(design: &Design) -> (Design, Vec<f64>) {
    let (n, b) = (design.n, design.b);
    let mut q = design.cols.clone();
    let mut t = vec![0.0; b * b];
    for j in 0..b {
        t[j * b + j] = 1.0;
    }
    let dot = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() / n as f64;
    for j in 0..b {
        let original = dot(design.col(j), design.col(j)).sqrt();
        for _ in 0..2 {
            for l in 0..j {
                let (head, tail) = q.split_at_mut(j * n);
                let ql = &head[l * n..(l + 1) * n];
                let qj = &mut tail[..n];
                let r = dot(ql, qj);
                if r == 0.0 {
                    continue;
                }
                qj.iter_mut().zip(ql).for_each(|(a, c)| *a -= r * c);
                let (th, tt) = t.split_at_mut(j * b);
                tt[..b].iter_mut().zip(&th[l * b..(l + 1) * b]).for_each(|(a, c)| *a -= r * c);
            }
        }
        let qj = &mut q[j * n..(j + 1) * n];
        let norm = dot(qj, qj).sqrt();
        if !(norm.is_finite() && norm > 1e-9 * original.max(1e-300)) {
            qj.iter_mut().for_each(|a| *a = 0.0);
            t[j * b..(j + 1) * b].iter_mut().for_each(|a| *a = 0.0);
        } else {
            qj.iter_mut().for_each(|a| *a /= norm);
            t[j * b..(j + 1) * b].iter_mut().for_each(|a| *a /= norm);
        }
    }
    (Design { n, b, cols: q }, t)
}

#[inline]
fn sgn(g: f64) -> f64 {
    if g >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn maximize_weighted_utility<R: Rng + ?Sized>(
    obj: &WeightedObjective<'_>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<Maximum> {
    ScoreProblem::new(obj.data, obj.pref, obj.class)?.maximize(&obj.weights, cfg, rng)
}

/// Largest sample size the 1-D oracle accepts.
pub const ORACLE_MAX_N: usize = 25;

/// Exact maximum of `(1/n) sum_i w_i s_i` over all labelings of the sorted
/// distinct covariate values with at most `k` sign changes. Tied covariates
/// share one label.
pub fn exhaustive_oracle_1d(data: &Dataset, k: usize, weights: &[f64], pref: &Preference) -> Result<f64> {
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: data.dim() });
    }
    let n = data.len();
    if n > ORACLE_MAX_N {
        return Err(Error::invalid(format!("oracle supports n <= {ORACLE_MAX_N}, got {n}")));
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    let table = UtilityTable::new(data, pref)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.row(a)[0].total_cmp(&data.row(b)[0]));

    // gain of labelling each tie group +1
    let mut groups: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for &i in &order {
        let x = data.row(i)[0];
        let g = weights[i] * table.gains[i];
        if groups.is_empty() || x != last {
            groups.push(g);
            last = x;
        } else {
            *groups.last_mut().unwrap() += g;
        }
    }

    let mut best = f64::NEG_INFINITY;
    let g = groups.len();
    for first in [1.0f64, -1.0] {
        // choose at most k of the g-1 boundaries to flip at
        let mut flips = Vec::new();
        enumerate_flips(g, k, 1, &mut flips, &mut |fl| {
            let mut sign = first;
            let mut next = 0;
            let mut total = 0.0;
            for (idx, &gain) in groups.iter().enumerate() {
                if next < fl.len() && fl[next] == idx {
                    sign = -sign;
                    next += 1;
                }
                total += sign * gain;
            }
            if total > best {
                best = total;
            }
        });
    }
    Ok(best / n as f64)
}

fn enumerate_flips(g: usize, budget: usize, start: usize, flips: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    visit(flips);
    if budget == 0 {
        return;
    }
    for p in start..g {
        flips.push(p);
        enumerate_flips(g, budget - 1, p + 1, flips, visit);
        flips.pop();
    }
}
