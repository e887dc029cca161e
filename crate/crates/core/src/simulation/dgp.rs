use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sieve::logistic;
use crate::utility::{CatalogPreference, Dataset, Label};

/// The two simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dgp {
    /// `X = 5 Beta(1, 1.3) - 2.5`, `p*(x) = Lambda(-0.5 x + 0.2 x^3)`.
    Cubic,
    /// `X1, X2 ~ U[-3.5, 3.5]`, `p*(x) = Lambda(Q(1.5 x1 + 1.5 x2))`.
    Ridge,
}

const BETA_SHAPE: f64 = 1.3;
const RIDGE_HALF_WIDTH: f64 = 3.5;

/// `Q(v) = (1.5 - 0.1 v) exp(-(0.25 v + 0.1 v^2 - 0.04 v^3))`.
pub fn ridge_index(v: f64) -> f64 {
    (1.5 - 0.1 * v) * (-(0.25 * v + 0.1 * v * v - 0.04 * v * v * v)).exp()
}

/// Inverse CDF of `5 Beta(1, 1.3) - 2.5` at `u`.
pub fn cubic_covariate(u: f64) -> f64 {
    5.0 * (1.0 - (1.0 - u).powf(1.0 / BETA_SHAPE)) - 2.5
}

impl Dgp {
    pub fn from_id(id: u32) -> Option<Dgp> {
        match id {
            1 => Some(Dgp::Cubic),
            2 => Some(Dgp::Ridge),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Dgp::Cubic => 1,
            Dgp::Ridge => 2,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Dgp::Cubic => 1,
            Dgp::Ridge => 2,
        }
    }

    /// Preferences 1 and 2 go with the first design, 3 and 4 with the second.
    pub fn supports(self, pref: CatalogPreference) -> bool {
        matches!(
            (self, pref),
            (Dgp::Cubic, CatalogPreference::Flat | CatalogPreference::Sloped)
                | (Dgp::Ridge, CatalogPreference::HighCutoff | CatalogPreference::Banded)
        )
    }

    pub fn true_probability(self, x: &[f64]) -> f64 {
        match self {
            Dgp::Cubic => {
                let v = x[0];
                logistic(-0.5 * v + 0.2 * v * v * v)
            }
            Dgp::Ridge => logistic(ridge_index(1.5 * x[0] + 1.5 * x[1])),
        }
    }

    /// Covariates first, then one uniform for the label, per observation.
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let d = self.dim();
        let mut labels = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * d);
        for _ in 0..n {
            let start = x.len();
            match self {
                Dgp::Cubic => x.push(cubic_covariate(rng.random::<f64>())),
                Dgp::Ridge => {
                    for _ in 0..2 {
                        x.push(rng.random_range(-RIDGE_HALF_WIDTH..=RIDGE_HALF_WIDTH));
                    }
                }
            }
            let p = self.true_probability(&x[start..]);
            labels.push(if rng.random::<f64>() < p { Label::Positive } else { Label::Negative });
        }
        Dataset::from_parts(d, labels, x)
    }
}

impl fmt::Display for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Dgp> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("dgp").unwrap_or(&t);
        t.parse::<u32>()
            .ok()
            .and_then(Dgp::from_id)
            .ok_or_else(|| Error::Config(format!("unknown dgp '{s}', expected 1 or 2")))
    }
}
