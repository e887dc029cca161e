//! Likelihood and margin based baselines: logit maximum likelihood, AIC/BIC
//! selection, L1-penalized logit and the L1 support vector machine.

mod lasso;
mod logit;
mod svm;

pub use lasso::{lasso_logit, lambda_grid, LassoConfig, LassoFit};
pub(crate) use logit::select_from_fits;
pub use logit::{ic_choose, ic_select, logit_mle, InformationCriterion, LogitFit};
pub use svm::{l1_svm, SvmConfig, SvmFit};

/// `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `log(1 + exp(v))` without overflow.
pub(crate) fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}
