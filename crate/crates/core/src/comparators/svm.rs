use rand::Rng;

use super::soft_threshold;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::selection::{argmax_first, fold_partition, split_fold};
use crate::sieve::{Link, PolynomialClass, PredictionRule};
use crate::utility::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub grid_size: usize,
    pub ratio: f64,
    pub lambdas: Option<Vec<f64>>,
    pub folds: usize,
    pub iterations: usize,
    /// `c` in the step size `c / sqrt(t)`.
    pub step: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { grid_size: 20, ratio: 1e-3, lambdas: None, folds: 10, iterations: 50_000, step: 0.1 }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<()> {
        match &self.lambdas {
            Some(l) if l.is_empty() => return Err(Error::invalid("lambda grid is empty")),
            Some(l) if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                return Err(Error::invalid("lambda values must be finite and nonnegative"))
            }
            Some(_) => {}
            None => {
                if self.grid_size == 0 || !(self.ratio > 0.0 && self.ratio <= 1.0) {
                    return Err(Error::invalid("svm grid needs a positive size and a ratio in (0, 1]"));
                }
            }
        }
        if self.iterations == 0 || !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("svm needs positive iterations and step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SvmFit {
    /// Logistic link over the raw covariates; the standardization is folded
    /// into the coefficients.
    pub rule: PredictionRule,
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out hinge loss per grid value.
    pub cv_loss: Vec<f64>,
    /// Mean training hinge loss of the final fit.
    pub train_hinge: f64,
}

/// Monomials of covariates standardized with frozen statistics, row-major.
struct Features {
    b: usize,
    rows: Vec<f64>,
    y: Vec<f64>,
}

struct Scaling {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaling {
    fn fit(data: &Dataset) -> Scaling {
        let (d, n) = (data.dim(), data.len() as f64);
        let mut mean = vec![0.0; d];
        for obs in data.iter() {
            for (m, v) in mean.iter_mut().zip(obs.x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for obs in data.iter() {
            for ((s, v), m) in var.iter_mut().zip(obs.x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Scaling { mean, scale }
    }

    fn features(&self, class: &PolynomialClass, data: &Dataset) -> Features {
        let b = class.basis_len();
        let mut rows = vec![0.0; data.len() * b];
        let mut z = vec![0.0; data.dim()];
        for (i, obs) in data.iter().enumerate() {
            for (l, zl) in z.iter_mut().enumerate() {
                *zl = (obs.x[l] - self.mean[l]) / self.scale[l];
            }
            class.monomials_into(&z, &mut rows[i * b..(i + 1) * b]);
        }
        Features { b, rows, y: data.labels().iter().map(|l| l.value()).collect() }
    }
}

impl Features {
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.b..(i + 1) * self.b]
    }

    fn mean_hinge(&self, beta: &[f64]) -> f64 {
        let n = self.y.len();
        (0..n)
            .map(|i| {
                let f: f64 = self.row(i).iter().zip(beta).map(|(p, b)| p * b).sum();
                (1.0 - self.y[i] * f).max(0.0)
            })
            .sum::<f64>()
            / n as f64
    }

    /// At zero coefficients every margin is inside the hinge.
    fn lambda_max(&self) -> f64 {
        let n = self.y.len() as f64;
        (1..self.b)
            .map(|j| ((0..self.y.len()).map(|i| self.y[i] * self.row(i)[j]).sum::<f64>() / n).abs())
            .fold(0.0, f64::max)
    }
}

/// Stochastic proximal subgradient on mean hinge plus `lambda` times the L1
/// norm of the non-intercept coefficients. Returns the average of the second
/// half of the iterates.
fn solve<R: Rng + ?Sized>(feat: &Features, lambda: f64, cfg: &SvmConfig, rng: &mut R) -> Vec<f64> {
    let (n, b) = (feat.y.len(), feat.b);
    let mut beta = vec![0.0; b];
    let mut avg = vec![0.0; b];
    let burn = cfg.iterations / 2;
    for t in 1..=cfg.iterations {
        let eta = cfg.step / (t as f64).sqrt();
        let i = rng.random_range(0..n);
        let (row, y) = (feat.row(i), feat.y[i]);
        let f: f64 = row.iter().zip(&beta).map(|(p, c)| p * c).sum();
        if y * f < 1.0 {
            for (c, p) in beta.iter_mut().zip(row) {
                *c += eta * y * p;
            }
        }
        for c in beta.iter_mut().skip(1) {
            *c = soft_threshold(*c, eta * lambda);
        }
        if t > burn {
            let w = 1.0 / (t - burn) as f64;
            for (a, c) in avg.iter_mut().zip(&beta) {
                *a += w * (c - *a);
            }
        }
    }
    // the averaged iterate is rarely exactly sparse; clear what the last
    // iterate has thresholded away
    for (a, c) in avg.iter_mut().zip(&beta).skip(1) {
        if *c == 0.0 && a.abs() <= cfg.step * lambda {
            *a = 0.0;
        }
    }
    avg
}

/// L1-penalized hinge-loss classifier on monomials of standardized
/// covariates, with the penalty chosen by cross-validated held-out hinge loss.
/// The returned rule is the logistic transform of the fitted score, so its
/// decision at one half agrees with the sign of the score.
pub fn l1_svm<R: Rng + ?Sized>(data: &Dataset, degree: usize, cfg: &SvmConfig, rng: &mut R) -> Result<SvmFit> {
    cfg.validate()?;
    let class = PolynomialClass::new(data.dim(), degree, Link::Identity)?;
    let scaling = Scaling::fit(data);
    let full = scaling.features(&class, data);
    let grid = match &cfg.lambdas {
        Some(l) => l.clone(),
        None => super::lambda_grid(full.lambda_max(), cfg.grid_size, cfg.ratio),
    };

    let mut cv_loss = vec![0.0; grid.len()];
    if grid.len() > 1 {
        let folds = fold_partition(data.len(), cfg.folds, rng)?;
        for fold in &folds {
            let (train, valid) = split_fold(data, fold)?;
            let s = Scaling::fit(&train);
            let (ft, fv) = (s.features(&class, &train), s.features(&class, &valid));
            for (loss, &lambda) in cv_loss.iter_mut().zip(&grid) {
                let mut fit_rng = stream(rng.random());
                let beta = solve(&ft, lambda, cfg, &mut fit_rng);
                *loss += fv.mean_hinge(&beta) / folds.len() as f64;
            }
        }
    }
    let neg: Vec<f64> = cv_loss.iter().map(|l| -l).collect();
    let best = argmax_first(&neg).ok_or_else(|| Error::Numerical("svm cross-validation losses are NaN".into()))?;
    let beta = solve(&full, grid[best], cfg, &mut stream(rng.random()));
    if beta.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("svm coefficients diverged".into()));
    }
    let train_hinge = full.mean_hinge(&beta);
    let rule = PredictionRule::from_standardized(class.with_link(Link::Logistic), &beta, &scaling.mean, &scaling.scale)?;
    Ok(SvmFit { rule, lambda: grid[best], grid, cv_loss, train_hinge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::Label;

    fn separated(n: usize) -> Dataset {
        Dataset::from_rows(
            1,
            (0..n).map(|i| {
                let x = 3.0 + 4.0 * (i as f64 / (n - 1) as f64 - 0.5);
                let label = if x > 3.2 { Label::Positive } else { Label::Negative };
                (label, vec![if label == Label::Positive { x + 0.3 } else { x - 0.3 }])
            }),
        )
        .unwrap()
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut rng = stream(seed);
        Dataset::from_rows(
            2,
            (0..n).map(|_| {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(5.0..9.0)];
                let p = crate::sieve::logistic(1.5 * x[0] - 0.4 * (x[1] - 7.0));
                (if rng.random::<f64>() < p { Label::Positive } else { Label::Negative }, x)
            }),
        )
        .unwrap()
    }

    #[test]
    fn separable_hinge_vanishes() {
        let data = separated(80);
        let cfg = SvmConfig { lambdas: Some(vec![1e-6]), ..SvmConfig::default() };
        let fit = l1_svm(&data, 1, &cfg, &mut stream(3)).unwrap();
        assert!(fit.train_hinge < 0.02, "hinge {}", fit.train_hinge);
        for obs in data.iter() {
            let f = fit.rule.polynomial(obs.x);
            assert_eq!(Label::sign_of(f), obs.y);
        }
    }

    #[test]
    fn heavy_penalty_is_constant() {
        let data = noisy(120, 2);
        let cfg = SvmConfig { lambdas: Some(vec![1e4]), iterations: 5_000, ..SvmConfig::default() };
        let fit = l1_svm(&data, 3, &cfg, &mut stream(3)).unwrap();
        assert!(fit.rule.coefficients()[1..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn logistic_decision_matches_score_sign() {
        let data = noisy(200, 5);
        let cfg = SvmConfig { grid_size: 5, folds: 5, iterations: 10_000, ..SvmConfig::default() };
        let fit = l1_svm(&data, 3, &cfg, &mut stream(8)).unwrap();
        assert_eq!(fit.rule.class().link(), Link::Logistic);
        let mut rng = stream(99);
        for _ in 0..2000 {
            let x = [rng.random_range(-4.0..4.0), rng.random_range(3.0..11.0)];
            let f = fit.rule.polynomial(&x);
            let p = fit.rule.evaluate(&x).unwrap();
            assert_eq!(Label::sign_of(p - 0.5), Label::sign_of(f), "at {x:?}: f={f}, p={p}");
        }
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let data = noisy(150, 7);
        let cfg = SvmConfig { grid_size: 6, folds: 5, iterations: 8_000, ..SvmConfig::default() };
        let a = l1_svm(&data, 2, &cfg, &mut stream(4)).unwrap();
        let b = l1_svm(&data, 2, &cfg, &mut stream(4)).unwrap();
        assert_eq!(a.rule, b.rule);
        assert_eq!(a.cv_loss.len(), 6);
        let i = a.grid.iter().position(|l| *l == a.lambda).unwrap();
        assert!(a.cv_loss.iter().all(|l| *l >= a.cv_loss[i]));
        // better than the all-zero score, whose hinge is exactly 1
        assert!(a.cv_loss[i] < 1.0);
    }
}
