//! The two simulation designs, the oracle rule `sign(p*(x) - c(x))` and the
//! replicated out-of-sample experiment.

mod dgp;
mod experiment;

pub use dgp::{cubic_covariate, ridge_index, Dgp};
pub use experiment::{
    rgeu_experiment, Estimator, EstimatorSummary, ExperimentConfig, ExperimentReport, Technical, DEFAULT_ALPHA_GRID,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::utility::{utility_s, Dataset, Label, Preference, UtilityValue};

/// Empirical utility of the rule `sign(p*(x) - c(x))` on `data`.
pub fn oracle_utility(dgp: Dgp, pref: &Preference, data: &Dataset) -> Result<UtilityValue> {
    if data.dim() != dgp.dim() {
        return Err(Error::DimensionMismatch { expected: dgp.dim(), got: data.dim() });
    }
    if data.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for obs in data.iter() {
        let decision = Label::sign_of(dgp.true_probability(obs.x) - pref.cutoff(obs.x));
        total += utility_s(obs, decision, pref)?.get();
    }
    Ok(UtilityValue(total / data.len() as f64))
}

/// Monte Carlo estimate of `S* = 2 E[b(X) |p*(X) - c(X)|]` and its standard
/// error from `draws` covariate draws.
pub fn maximal_utility<R: Rng + ?Sized>(dgp: Dgp, pref: &Preference, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    // the labels of a sampled dataset are ignored
    let data = dgp.sample(draws, rng)?;
    let (mut sum, mut sq) = (0.0, 0.0);
    for obs in data.iter() {
        let v = 2.0 * pref.weight(obs.x) * (dgp.true_probability(obs.x) - pref.cutoff(obs.x)).abs();
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
