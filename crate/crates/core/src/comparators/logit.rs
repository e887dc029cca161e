use nalgebra::{DMatrix, DVector};

use super::softplus;
use crate::error::{Error, Result};
use crate::selection::{argmax_first, KDiagnostics, SelectionResult};
use crate::sieve::{HierarchySpec, Link, PolynomialClass, PredictionRule};
use crate::utility::Dataset;

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;
const SEPARATION_NORM: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct LogitFit {
    pub rule: PredictionRule,
    /// `sum_i log Lambda(y_i f(x_i))`.
    pub log_likelihood: f64,
    pub converged: bool,
    /// Set when the coefficients ran past the separation threshold.
    pub separated: bool,
    pub iterations: usize,
    /// From the inverse observed information at the final iterate.
    pub std_errors: Vec<f64>,
    /// Log-likelihood at the start and after every accepted step.
    pub path: Vec<f64>,
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    -eta.iter().zip(y).map(|(e, yi)| softplus(-yi * e)).sum::<f64>()
}

/// Logit maximum likelihood on the monomial design, by iteratively
/// reweighted least squares with step halving.
pub fn logit_mle(class: &PolynomialClass, data: &Dataset) -> Result<LogitFit> {
    if class.link() != Link::Logistic {
        return Err(Error::invalid("logit fits need the logistic link"));
    }
    let design = class.design(data)?;
    let (n, b) = (design.n, design.b);
    let x = DMatrix::from_column_slice(n, b, &design.cols);
    let y: Vec<f64> = data.labels().iter().map(|l| l.value()).collect();

    let mut beta = DVector::zeros(b);
    let mut eta = &x * &beta;
    let mut ll = log_likelihood(&eta, &y);
    let mut path = vec![ll];
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    let mut hessian = DMatrix::zeros(b, b);
    while iterations < MAX_ITER {
        iterations += 1;
        let p: Vec<f64> = eta.iter().map(|&e| crate::sieve::logistic(e)).collect();
        let w: Vec<f64> = p.iter().map(|pi| (pi * (1.0 - pi)).max(1e-12)).collect();
        let mut xw = x.clone();
        for (i, wi) in w.iter().enumerate() {
            xw.row_mut(i).scale_mut(*wi);
        }
        hessian = x.transpose() * &xw;
        let resid = DVector::from_iterator(n, y.iter().zip(&p).map(|(yi, pi)| (yi + 1.0) / 2.0 - pi));
        let grad = x.transpose() * resid;
        let delta = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hessian.clone().lu().solve(&grad) {
                Some(d) => d,
                None => break,
            },
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let cand = &beta + &delta * step;
            let cand_eta = &x * &cand;
            let cand_ll = log_likelihood(&cand_eta, &y);
            if cand_ll >= ll {
                let change = (&delta * step).amax();
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                path.push(ll);
                accepted = true;
                if change < TOL {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if beta.amax() > SEPARATION_NORM {
            separated = true;
            converged = false;
            break;
        }
        if !accepted {
            converged = grad_small(&x, &eta, &y);
            break;
        }
        if converged {
            break;
        }
    }
    let std_errors = match hessian.clone().try_inverse() {
        Some(inv) => (0..b).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; b],
    };
    let coefficients: Vec<f64> = beta.iter().cloned().collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("logit coefficients diverged".into()));
    }
    Ok(LogitFit {
        rule: PredictionRule::new(class.clone(), coefficients)?,
        log_likelihood: ll,
        converged,
        separated,
        iterations,
        std_errors,
        path,
    })
}

fn grad_small(x: &DMatrix<f64>, eta: &DVector<f64>, y: &[f64]) -> bool {
    let resid = DVector::from_iterator(eta.len(), eta.iter().zip(y).map(|(&e, yi)| (yi + 1.0) / 2.0 - crate::sieve::logistic(e)));
    (x.transpose() * resid).amax() / (eta.len() as f64) < 1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationCriterion {
    Aic,
    Bic,
}

impl InformationCriterion {
    /// `C^IC_n(k)`: parameters over `n`, times `log(n) / 2` for BIC.
    pub fn penalty(self, params: usize, n: usize) -> f64 {
        let base = params as f64 / n as f64;
        match self {
            InformationCriterion::Aic => base,
            InformationCriterion::Bic => base * (n as f64).ln() / 2.0,
        }
    }
}

/// Index (from 0) maximizing `mean_loglik[k] - C^IC_n(k)`, smallest on ties.
pub fn ic_choose(mean_loglik: &[f64], params: &[usize], n: usize, criterion: InformationCriterion) -> Option<usize> {
    let scores: Vec<f64> = mean_loglik.iter().zip(params).map(|(l, &p)| l - criterion.penalty(p, n)).collect();
    argmax_first(&scores)
}

/// Fits every class of a logistic hierarchy and selects by AIC or BIC.
pub fn ic_select(hierarchy: &HierarchySpec, data: &Dataset, criterion: InformationCriterion) -> Result<SelectionResult> {
    let fits = hierarchy.classes().iter().map(|c| logit_mle(c, data)).collect::<Result<Vec<_>>>()?;
    select_from_fits(&fits, data.len(), criterion)
}

pub(crate) fn select_from_fits(fits: &[LogitFit], n: usize, criterion: InformationCriterion) -> Result<SelectionResult> {
    let mean: Vec<f64> = fits.iter().map(|f| f.log_likelihood / n as f64).collect();
    let params: Vec<usize> = fits.iter().map(|f| f.rule.class().basis_len()).collect();
    let i = ic_choose(&mean, &params, n, criterion).ok_or_else(|| Error::Numerical("log-likelihoods are NaN".into()))?;
    let per_k = mean
        .iter()
        .zip(&params)
        .enumerate()
        .map(|(k, (&l, &p))| {
            let pen = criterion.penalty(p, n);
            KDiagnostics { k: k + 1, utility: l, penalty: Some(pen), score: l - pen }
        })
        .collect();
    Ok(SelectionResult { chosen_k: i + 1, rule: fits[i].rule.clone(), per_k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sieve::logit;
    use crate::utility::Label;
    use rand::Rng;

    #[test]
    fn intercept_only_is_logit_of_share() {
        let data = Dataset::from_rows(1, (0..40).map(|i| (if i % 4 == 0 { Label::Positive } else { Label::Negative }, vec![i as f64]))).unwrap();
        let fit = logit_mle(&PolynomialClass::new(1, 0, Link::Logistic).unwrap(), &data).unwrap();
        assert!(fit.converged);
        assert!((fit.rule.coefficients()[0] - logit(0.25)).abs() < 1e-9);
    }

    #[test]
    fn all_positive_is_flagged() {
        let data = Dataset::from_rows(1, (0..20).map(|i| (Label::Positive, vec![i as f64 / 10.0]))).unwrap();
        let fit = logit_mle(&PolynomialClass::new(1, 1, Link::Logistic).unwrap(), &data).unwrap();
        assert!(fit.separated && !fit.converged);
    }

    #[test]
    fn recovers_known_coefficients() {
        let truth = [0.3, -0.8];
        let mut rng = stream(2024);
        let data = Dataset::from_rows(
            1,
            (0..200).map(|_| {
                let x: f64 = rng.random_range(-2.0..2.0);
                let p = crate::sieve::logistic(truth[0] + truth[1] * x);
                (if rng.random::<f64>() < p { Label::Positive } else { Label::Negative }, vec![x])
            }),
        )
        .unwrap();
        let fit = logit_mle(&PolynomialClass::new(1, 1, Link::Logistic).unwrap(), &data).unwrap();
        assert!(fit.converged);
        assert!(fit.path.windows(2).all(|w| w[1] >= w[0]));
        for j in 0..2 {
            assert!((fit.rule.coefficients()[j] - truth[j]).abs() < 3.0 * fit.std_errors[j]);
        }
        let p = fit.rule.evaluate(&[1.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn ic_examples() {
        let ll = [-0.60, -0.59, -0.585];
        let params = [2, 3, 4];
        assert_eq!(ic_choose(&ll, &params, 500, InformationCriterion::Aic), Some(2));
        // BIC scores -0.61243, -0.60864, -0.60986
        assert_eq!(ic_choose(&ll, &params, 500, InformationCriterion::Bic), Some(1));
        assert_eq!(ic_choose(&[-0.5, -0.5], &[2, 3], 100, InformationCriterion::Aic), Some(0));
        assert_eq!(ic_choose(&[-0.5, -0.5], &[2, 3], 100, InformationCriterion::Bic), Some(0));
    }

    #[test]
    fn rejects_identity_link() {
        let data = Dataset::from_rows(1, [(Label::Positive, vec![0.0])]).unwrap();
        assert!(logit_mle(&PolynomialClass::new(1, 1, Link::Identity).unwrap(), &data).is_err());
    }
}
