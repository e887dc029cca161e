use nalgebra::DMatrix;
use rand::Rng;

use super::{soft_threshold, softplus};
use crate::error::{Error, Result};
use crate::selection::{fold_partition, split_fold};
use crate::sieve::{logistic, Design, Link, PolynomialClass, PredictionRule};
use crate::utility::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    pub grid_size: usize,
    /// Smallest grid value over the largest.
    pub ratio: f64,
    /// Explicit grid; replaces the generated one when set.
    pub lambdas: Option<Vec<f64>>,
    pub folds: usize,
    pub max_iter: usize,
    /// On the largest coefficient change between iterates.
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { grid_size: 50, ratio: 1e-4, lambdas: None, folds: 10, max_iter: 20_000, tol: 1e-9 }
    }
}

impl LassoConfig {
    fn validate(&self) -> Result<()> {
        match &self.lambdas {
            Some(l) if l.is_empty() => return Err(Error::invalid("lambda grid is empty")),
            Some(l) if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                return Err(Error::invalid("lambda values must be finite and nonnegative"))
            }
            Some(_) => {}
            None => {
                if self.grid_size == 0 {
                    return Err(Error::invalid("lasso grid size must be positive"));
                }
                if !(self.ratio > 0.0 && self.ratio <= 1.0) {
                    return Err(Error::invalid("lasso grid ratio must lie in (0, 1]"));
                }
            }
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::invalid("lasso needs a positive iteration cap and tolerance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Logistic link, raw (unstandardized) coefficients.
    pub rule: PredictionRule,
    pub lambda: f64,
    /// False when the final refit hit the iteration cap.
    pub converged: bool,
    pub grid: Vec<f64>,
    /// Mean held-out negative log-likelihood per grid value.
    pub cv_loss: Vec<f64>,
}

/// `size` log-spaced values from `max` down to `max * ratio`.
pub fn lambda_grid(max: f64, size: usize, ratio: f64) -> Vec<f64> {
    if size <= 1 {
        return vec![max; size];
    }
    let step = ratio.ln() / (size - 1) as f64;
    (0..size).map(|i| max * (step * i as f64).exp()).collect()
}

/// Non-intercept monomial columns, centred and scaled on the data they came
/// from. Constant columns are dropped.
struct Standardized {
    n: usize,
    keep: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    z: Vec<f64>,
}

impl Standardized {
    fn fit(design: &Design) -> Standardized {
        let n = design.n;
        let (mut keep, mut mean, mut scale) = (Vec::new(), Vec::new(), Vec::new());
        for j in 1..design.b {
            let col = design.col(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            if s > 1e-12 * (1.0 + m.abs()) {
                keep.push(j);
                mean.push(m);
                scale.push(s);
            }
        }
        let mut out = Standardized { n, keep, mean, scale, z: Vec::new() };
        out.z = out.apply(design);
        out
    }

    fn apply(&self, design: &Design) -> Vec<f64> {
        let mut z = Vec::with_capacity(design.n * self.keep.len());
        for (c, &j) in self.keep.iter().enumerate() {
            z.extend(design.col(j).iter().map(|v| (v - self.mean[c]) / self.scale[c]));
        }
        z
    }

    fn clone_stats(&self) -> Standardized {
        Standardized { n: self.n, keep: self.keep.clone(), mean: self.mean.clone(), scale: self.scale.clone(), z: Vec::new() }
    }

    fn p(&self) -> usize {
        self.keep.len()
    }

    fn raw_coefficients(&self, b: usize, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut raw = vec![0.0; b];
        raw[0] = intercept;
        for (c, &j) in self.keep.iter().enumerate() {
            raw[j] = beta[c] / self.scale[c];
            raw[0] -= beta[c] * self.mean[c] / self.scale[c];
        }
        raw
    }

    /// Quarter of the top eigenvalue of `[1 Z]'[1 Z] / n`.
    fn lipschitz(&self) -> f64 {
        let p = self.p();
        let n = self.n as f64;
        let mut gram = DMatrix::zeros(p + 1, p + 1);
        gram[(0, 0)] = 1.0;
        for a in 0..p {
            let za = &self.z[a * self.n..(a + 1) * self.n];
            gram[(0, a + 1)] = za.iter().sum::<f64>() / n;
            gram[(a + 1, 0)] = gram[(0, a + 1)];
            for c in a..p {
                let zc = &self.z[c * self.n..(c + 1) * self.n];
                let v = za.iter().zip(zc).map(|(u, w)| u * w).sum::<f64>() / n;
                gram[(a + 1, c + 1)] = v;
                gram[(c + 1, a + 1)] = v;
            }
        }
        let top = gram.symmetric_eigenvalues().max();
        0.25 * top.max(1e-12)
    }

    fn eta(&self, intercept: f64, beta: &[f64], out: &mut [f64]) {
        out.fill(intercept);
        for (c, &bc) in beta.iter().enumerate() {
            if bc != 0.0 {
                for (o, v) in out.iter_mut().zip(&self.z[c * self.n..(c + 1) * self.n]) {
                    *o += bc * v;
                }
            }
        }
    }
}

fn labels(data: &Dataset) -> Vec<f64> {
    data.labels().iter().map(|l| l.value()).collect()
}

fn mean_nll(eta: &[f64], y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(e, yi)| softplus(-yi * e)).sum::<f64>() / eta.len() as f64
}

/// Smallest penalty at which every penalized coefficient stays at zero,
/// nudged up so rounding in the first gradient cannot cross it.
fn lambda_max(std: &Standardized, y: &[f64]) -> f64 {
    let n = std.n as f64;
    let share = y.iter().filter(|v| **v > 0.0).count() as f64 / n;
    (0..std.p())
        .map(|c| {
            let z = &std.z[c * std.n..(c + 1) * std.n];
            (z.iter().zip(y).map(|(v, yi)| v * ((yi + 1.0) / 2.0 - share)).sum::<f64>() / n).abs()
        })
        .fold(0.0, f64::max)
        * (1.0 + 1e-9)
}

/// Accelerated proximal gradient with adaptive restart. Warm-starts from and
/// overwrites `intercept` and `beta`; returns whether the tolerance was met.
fn fista(std: &Standardized, y: &[f64], lambda: f64, lip: f64, cfg: &LassoConfig, intercept: &mut f64, beta: &mut [f64]) -> bool {
    let (n, p) = (std.n, std.p());
    let mut eta = vec![0.0; n];
    let mut grad = vec![0.0; p];
    let (mut v0, mut v) = (*intercept, beta.to_vec());
    let mut t = 1.0f64;
    let mut next = vec![0.0; p];
    for _ in 0..cfg.max_iter {
        std.eta(v0, &v, &mut eta);
        let r: Vec<f64> = eta.iter().zip(y).map(|(e, yi)| -yi * logistic(-yi * e) / n as f64).collect();
        let g0: f64 = r.iter().sum();
        for (c, g) in grad.iter_mut().enumerate() {
            *g = std.z[c * n..(c + 1) * n].iter().zip(&r).map(|(z, ri)| z * ri).sum();
        }
        let next0 = v0 - g0 / lip;
        for c in 0..p {
            next[c] = soft_threshold(v[c] - grad[c] / lip, lambda / lip);
        }
        let mut change = (next0 - *intercept).abs();
        let mut dir = (v0 - next0) * (next0 - *intercept);
        for c in 0..p {
            change = change.max((next[c] - beta[c]).abs());
            dir += (v[c] - next[c]) * (next[c] - beta[c]);
        }
        if dir > 0.0 {
            t = 1.0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / t_next;
        v0 = next0 + mom * (next0 - *intercept);
        for c in 0..p {
            v[c] = next[c] + mom * (next[c] - beta[c]);
        }
        *intercept = next0;
        beta.copy_from_slice(&next);
        t = t_next;
        if change < cfg.tol {
            return true;
        }
    }
    false
}

/// Fits along the grid (in the given order) with warm starts, calling
/// `visit(index, intercept, beta, converged)` after each value.
fn path<F>(std: &Standardized, y: &[f64], grid: &[f64], cfg: &LassoConfig, mut visit: F)
where
    F: FnMut(usize, f64, &[f64], bool),
{
    let share = y.iter().filter(|v| **v > 0.0).count() as f64 / y.len() as f64;
    let mut intercept = crate::sieve::logit(share.clamp(1e-6, 1.0 - 1e-6));
    let mut beta = vec![0.0; std.p()];
    let lip = std.lipschitz();
    for (i, &lambda) in grid.iter().enumerate() {
        let ok = fista(std, y, lambda, lip, cfg, &mut intercept, &mut beta);
        visit(i, intercept, &beta, ok);
    }
}

/// L1-penalized logit over the degree-`degree` polynomial class with the
/// penalty chosen by cross-validated held-out log-likelihood.
pub fn lasso_logit<R: Rng + ?Sized>(data: &Dataset, degree: usize, cfg: &LassoConfig, rng: &mut R) -> Result<LassoFit> {
    cfg.validate()?;
    let class = PolynomialClass::new(data.dim(), degree, Link::Logistic)?;
    let y = labels(data);
    if y.iter().all(|v| *v > 0.0) || y.iter().all(|v| *v < 0.0) {
        return Err(Error::invalid("lasso needs both labels in the data"));
    }
    let full = Standardized::fit(&class.design(data)?);
    let grid = match &cfg.lambdas {
        Some(l) => l.clone(),
        None => lambda_grid(lambda_max(&full, &y), cfg.grid_size, cfg.ratio),
    };

    let mut cv_loss = vec![0.0; grid.len()];
    if grid.len() > 1 {
        let folds = fold_partition(data.len(), cfg.folds, rng)?;
        for fold in &folds {
            let (train, valid) = split_fold(data, fold)?;
            let std = Standardized::fit(&class.design(&train)?);
            let held = Standardized { z: std.apply(&class.design(&valid)?), n: valid.len(), ..std.clone_stats() };
            let (yt, yv) = (labels(&train), labels(&valid));
            let mut eta = vec![0.0; valid.len()];
            path(&std, &yt, &grid, cfg, |i, b0, beta, _| {
                held.eta(b0, beta, &mut eta);
                cv_loss[i] += mean_nll(&eta, &yv) / folds.len() as f64;
            });
        }
    }
    // first minimum: the grid runs from strong to weak penalties
    let best = cv_loss
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, &l)| match acc {
            Some((_, b)) if !(l < b) => acc,
            _ if l.is_nan() => acc,
            _ => Some((i, l)),
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numerical("lasso cross-validation losses are NaN".into()))?;

    let mut result = None;
    path(&full, &y, &grid[..=best], cfg, |i, b0, beta, ok| {
        if i == best {
            result = Some((full.raw_coefficients(class.basis_len(), b0, beta), ok));
        }
    });
    let (coefficients, converged) = result.expect("path visits the chosen index");
    Ok(LassoFit { rule: PredictionRule::new(class, coefficients)?, lambda: grid[best], converged, grid, cv_loss })
}
